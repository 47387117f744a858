use num_complex::Complex64;
use proptest::prelude::*;

use oldb2d::io::initial::random_admissible;
use oldb2d::io::snapshot::{decode_snapshot, encode_snapshot};
use oldb2d::io::{parse_config, read_snapshot, write_snapshot};
use oldb2d::spectral::{backward_all, forward_all, Spectrum};
use oldb2d::{make_grid, Error, ScalarField};

fn grid_size() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![8usize, 16, 24, 32])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn snapshot_round_trip_is_bitwise(n in grid_size(), seed in any::<u64>(), amp in 0.0f64..3.0) {
        let g = make_grid(n, 1.0 + amp).unwrap();
        let s = random_admissible(&g, 1.0, amp, 0.3, 2, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        write_snapshot(&s, &path).unwrap();
        let back = read_snapshot(&path, &g).unwrap();
        prop_assert_eq!(back.time.to_bits(), s.time.to_bits());
        for (x, y) in [
            (&s.u.x, &back.u.x), (&s.u.y, &back.u.y),
            (&s.stress.a, &back.stress.a), (&s.stress.b, &back.stress.b),
            (&s.stress.c, &back.stress.c), (&s.rho, &back.rho),
        ] {
            prop_assert!(x.values().iter().zip(y.values()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn truncated_snapshots_are_rejected(seed in any::<u64>(), cut in 0.0f64..1.0) {
        let g = make_grid(8, 1.0).unwrap();
        let bytes = encode_snapshot(&random_admissible(&g, 1.0, 0.5, 0.3, 2, seed).unwrap());
        let len = ((bytes.len() - 1) as f64 * cut) as usize;
        prop_assert!(decode_snapshot(&bytes[..len]).is_err());
    }

    #[test]
    fn batched_transforms_match_single_ones(n in grid_size(), count in 1usize..6, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let g = make_grid(n, 2.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let fields: Vec<ScalarField> = (0..count)
            .map(|_| ScalarField::new(g.clone(), (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        for (f, s) in fields.iter().zip(forward_all(&fields)) {
            let single = f.spectrum();
            let err = s.coeffs().iter().zip(single.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-15, "forward batch error {}", err);
        }
        // Arbitrary, non-Hermitian coefficients: the batch must still return
        // the real part of each inverse transform.
        let spectra: Vec<Spectrum> = (0..count)
            .map(|_| {
                let c = (0..n * n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                Spectrum::new(g.clone(), c).unwrap()
            })
            .collect();
        for (s, f) in spectra.iter().zip(backward_all(&spectra)) {
            let single = s.to_field();
            let err = f.values().iter().zip(single.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err < 1e-12, "backward batch error {}", err);
        }
    }

    #[test]
    fn config_reads_back_its_values(
        nu in 1e-4f64..1.0,
        kappa in 1e-4f64..1.0,
        k in 0.1f64..5.0,
        big_k in 0.1f64..5.0,
        half_n in 4usize..40,
        seed in any::<u64>(),
    ) {
        let text = format!(
            "# generated\nn = {}\nnu = {nu:e}\nkappa = {kappa:e}\nk = {k:e}\nbigK = {big_k:e}\nseed = {seed}\nL = 2pi\n",
            2 * half_n
        );
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(cfg.n, 2 * half_n);
        prop_assert_eq!(cfg.params.nu, nu);
        prop_assert_eq!(cfg.params.kappa, kappa);
        prop_assert_eq!(cfg.params.k, k);
        prop_assert_eq!(cfg.params.big_k, big_k);
        prop_assert_eq!(cfg.initial.seed, seed);
        prop_assert!((cfg.length - std::f64::consts::TAU).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_report_their_line(pad in 0usize..5, key in "[a-z]{3,8}_x") {
        let text = format!("{}{key} = 1\n", "n = 16\n".repeat(pad.min(1)) + &"\n".repeat(pad));
        match parse_config(&text) {
            Err(Error::Config { line, .. }) => prop_assert_eq!(line, pad.min(1) + pad + 1),
            other => prop_assert!(false, "unexpected {:?}", other.map(|c| c.n)),
        }
    }
}
