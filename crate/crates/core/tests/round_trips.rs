use proptest::prelude::*;
use umcf::config::parse_config;
use umcf::diagnostics::DiagnosticsRecord;
use umcf::io::{load_field_dump, read_diagnostics_csv, write_diagnostics_csv, write_field_dump, FieldMeta};
use umcf::model::{ModelParams, Stepper};
use umcf::{EnergyBreakdown, Grid, RealField};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3f64..1e3,
        (-300i32..300, 1.0f64..10.0).prop_map(|(e, m)| m * 10f64.powi(e)),
        Just(0.0),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn diagnostics_csv_round_trip(
        rows in prop::collection::vec((finite(), finite(), finite(), prop::option::of(finite()), finite()), 1..12)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let records: Vec<DiagnosticsRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(t, m, w, r, d))| DiagnosticsRecord {
                step: i as u64 * 7,
                time: t.abs(),
                energy: EnergyBreakdown { mass: m, willmore: w, total: m + w },
                radius_estimate: r,
                discrepancy_sup: d.abs(),
                u_max: 0.25,
                interface_peak_min: 0.125,
                clipped: 0,
            })
            .collect();
        write_diagnostics_csv(&records, &path).unwrap();
        prop_assert_eq!(read_diagnostics_csv(&path).unwrap(), records);
    }

    #[test]
    fn config_round_trip(
        n in prop::sample::select(vec![16usize, 32, 64, 128, 256]),
        len in 0.5f64..4.0,
        eps_coef in 1.0f64..4.0,
        sigma_coef in 0.5f64..8.0,
        dt in 1e-7f64..1e-3,
        steps in 1u64..100_000,
        radius in 0.05f64..0.4,
    ) {
        let text = format!(
            "[grid]\ndim = 2\nn = {n}\nlen = {len:?}\n\n[model]\neps_rule = \"{eps_coef:?}/N\"\n\
             sigma_rule = \"{sigma_coef:?}*eps^2\"\ndt = {dt:?}\n\n[[shapes]]\ntype = \"sphere\"\n\
             center = [0.5, 0.5]\nradius = {radius:?}\n\n[run]\nsteps = {steps}\ndiag_every = 10\n"
        );
        let first = parse_config(&text).unwrap();
        let again = parse_config(&first.to_toml().unwrap()).unwrap();
        prop_assert_eq!(&again, &first);
        prop_assert_eq!(again.resolve().unwrap(), first.resolve().unwrap());
        let r = first.resolve().unwrap();
        prop_assert_eq!(r.params.eps, eps_coef / n as f64);
    }

    #[test]
    fn field_dump_is_bit_exact(values in prop::collection::vec(any::<f64>(), 4 * 8)) {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(&[4, 8], &[1.0, 0.5]).unwrap();
        let u = RealField::from_values(&g, values).unwrap();
        let meta = FieldMeta::new(&g, 0.01, 42, 0.125);
        let path = dir.path().join("u.f64");
        write_field_dump(&u, &meta, &path).unwrap();
        let (back, meta_back) = load_field_dump(&path).unwrap();
        prop_assert_eq!(meta_back, meta);
        let same = u.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn projected_step_respects_obstacle(values in prop::collection::vec(0.0f64..0.25, 32 * 32), dt_factor in 0.01f64..1.0) {
        let g = Grid::cube(2, 32, 1.0).unwrap();
        let mut u = RealField::from_values(&g, values).unwrap();
        let params = ModelParams::unstabilized(3.0 / 32.0, 4.0, dt_factor);
        let mut stepper = Stepper::new(&g, params).unwrap();
        stepper.advance(&mut u, 1).unwrap();
        prop_assert!(u.max() <= 0.25);
    }
}
