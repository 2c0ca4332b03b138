//! Phase-sensitivity gains for squeezed superpositions with ideal and
//! synthetic noisy detection.
//!
//! `cargo run --release -p qdt --example gain_survey`

use std::time::Instant;

use qdt::analysis::linspace;
use qdt::metrology::{
    gain_map_with, gain_scaling_with, log_axis, optimize_squeezing, power_law_exponent,
    PhaseEstimator, SectorCache, SqueezedEnsemble,
};
use qdt::rabi::DarkCountModel;
use qdt::simulator::{build_detector, SyntheticDetectorSpec};

fn main() -> qdt::Result<()> {
    let cache = SectorCache::new();
    let noisy = build_detector(&SyntheticDetectorSpec::new(
        0.4,
        DarkCountModel::new(0.27)?,
        0.0,
        420,
    )?)?;

    let start = Instant::now();
    let css = SqueezedEnsemble::gaussian(1.0, 36.0, 0.0)?;
    let g = PhaseEstimator::new(&css, None, &cache)?.optimize()?;
    println!("s=1 dN=0 ideal: G {:.4} at theta {:.3}", g.gain, g.theta);
    let exp = SqueezedEnsemble::gaussian(1.0, 36.0, 6.0)?;
    for (label, v) in [("ideal", None), ("noisy", Some(&noisy))] {
        let g = PhaseEstimator::new(&exp, v, &cache)?.optimize()?;
        println!("s=1 dN=6 {label}: G {:.4} at theta {:.3}", g.gain, g.theta);
    }
    println!("  ({:.1?})", start.elapsed());

    let start = Instant::now();
    let s_axis: Vec<f64> = log_axis(0.01, 1.0, 25);
    let dn_axis: Vec<f64> = linspace(0.0, 6.0, 13);
    let map = gain_map_with(36.0, Some(&noisy), &s_axis, &dn_axis, &cache)?;
    let best = (0..map.gain.len())
        .max_by(|&a, &b| map.gain[a].total_cmp(&map.gain[b]))
        .unwrap();
    println!(
        "map max G {:.3} at s {:.3} dN {:.2} ({:.1?})",
        map.max(),
        s_axis[best / dn_axis.len()],
        dn_axis[best % dn_axis.len()],
        start.elapsed()
    );
    for (i, s) in s_axis.iter().enumerate().step_by(4) {
        let row: Vec<String> = (0..dn_axis.len())
            .step_by(3)
            .map(|j| format!("{:6.3}", map.get(i, j)))
            .collect();
        println!("  s {s:.3}: {}", row.join(" "));
    }
    let ideal = optimize_squeezing(36.0, 6.0, None, &cache)?;
    let real = optimize_squeezing(36.0, 6.0, Some(&noisy), &cache)?;
    println!(
        "dN=6 best over s: ideal {:.3} (s {:.3}) noisy {:.3} (s {:.3})",
        ideal.gain, ideal.s_opt, real.gain, real.s_opt
    );

    let start = Instant::now();
    let n_axis: Vec<f64> = vec![30.0, 50.0, 75.0, 100.0, 150.0, 200.0, 300.0];
    let curve = gain_scaling_with(None, &n_axis, &cache)?;
    for p in &curve {
        println!("  N {:5.0}: G {:.3} s {:.4}", p.n_mean, p.gain, p.s_opt);
    }
    let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.n_mean, p.gain)).collect();
    println!(
        "ideal exponent {:.3} ({:.1?})",
        power_law_exponent(&pts)?,
        start.elapsed()
    );
    let start = Instant::now();
    let curve = gain_scaling_with(Some(&noisy), &n_axis, &cache)?;
    for p in &curve {
        println!(
            "  noisy N {:5.0}: G {:.3} s {:.4}",
            p.n_mean, p.gain, p.s_opt
        );
    }
    println!("  ({:.1?})", start.elapsed());
    Ok(())
}
