use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qdt::io::{
    read_dataset_csv, read_dataset_json, read_detector_csv, read_rho_csv, write_dataset_csv,
    write_dataset_json, write_detector_csv, write_rho_csv,
};
use qdt::{DetectorMatrix, DiagonalState, HistogramDataset};

fn dataset() -> impl Strategy<Value = HistogramDataset> {
    proptest::collection::vec(
        (0.0f64..100.0, proptest::collection::vec(0u64..500, 1..30)),
        1..10,
    )
    .prop_filter_map("needs distinct times with shots", |mut rows| {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows.dedup_by(|a, b| a.0 == b.0);
        HistogramDataset::from_rows(rows).ok()
    })
}

proptest! {
    #[test]
    fn dataset_csv_round_trip_is_exact(data in dataset()) {
        let mut buf = Vec::new();
        write_dataset_csv(&data, &mut buf).unwrap();
        prop_assert_eq!(read_dataset_csv(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn dataset_json_round_trip_is_exact(data in dataset()) {
        let mut buf = Vec::new();
        write_dataset_json(&data, &mut buf).unwrap();
        prop_assert_eq!(read_dataset_json(buf.as_slice()).unwrap(), data);
    }

    /// Twelve significant digits keep matrices and states valid and close.
    #[test]
    fn detector_and_state_survive_text(n_max in 0usize..40, seed in any::<u64>(), mean in 1.0f64..30.0) {
        let v = DetectorMatrix::random(n_max, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut buf = Vec::new();
        write_detector_csv(&v, &mut buf).unwrap();
        let back = read_detector_csv(buf.as_slice()).unwrap();
        for (a, b) in v.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-11 * a.abs().max(1e-300));
        }
        let rho = DiagonalState::gaussian(mean, mean.sqrt()).unwrap();
        let mut buf = Vec::new();
        write_rho_csv(rho.as_slice(), &mut buf).unwrap();
        let back = read_rho_csv(buf.as_slice()).unwrap();
        prop_assert!((back.mean() - rho.mean()).abs() < 1e-9);
    }
}
