use proptest::prelude::*;

use landau::config::{parse_config_str, DomainKind, InitialKind, RunConfig};
use landau::geometry::{specular_reflect, DistributionField, Domain, SpatialMesh};
use landau::grid::norm_sq;
use landau::integrator::{EnergyLedger, LedgerRow};
use landau::io::{fmt_f64, ledger_to_csv, parse_ledger, parse_snapshot, snapshot_to_csv};
use landau::kernel::landau_kernel;
use landau::operators::CollisionOperator;
use landau::projection::{build_macro_basis, conserved_modes, project_p, remove_conserved};
use landau::VelocityGrid;

fn vec3(range: f64) -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-range..range)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kernel_annihilates_its_argument(z in vec3(10.0).prop_filter("nonzero", |z| norm_sq(*z) > 1e-6)) {
        let k = landau_kernel(z).unwrap();
        let scale = 1.0 / norm_sq(z).sqrt();
        for i in 0..3 {
            let row = k[i][0] * z[0] + k[i][1] * z[1] + k[i][2] * z[2];
            prop_assert!(row.abs() <= 1e-14 * (1.0 + scale * norm_sq(z).sqrt()));
            for j in 0..3 {
                prop_assert_eq!(k[i][j], k[j][i]);
            }
        }
    }

    #[test]
    fn reflection_is_an_isometric_involution(angle in 0.0..std::f64::consts::TAU, v in vec3(8.0)) {
        let n = [angle.cos(), angle.sin(), 0.0];
        let r = specular_reflect(n, v);
        let rr = specular_reflect(n, r);
        for i in 0..3 {
            prop_assert!((rr[i] - v[i]).abs() <= 1e-14 * (1.0 + norm_sq(v).sqrt()));
        }
        prop_assert!((norm_sq(r) - norm_sq(v)).abs() <= 1e-13 * (1.0 + norm_sq(v)));
        let vn = n[0] * v[0] + n[1] * v[1];
        let rn = n[0] * r[0] + n[1] * r[1];
        prop_assert!((vn + rn).abs() <= 1e-13 * (1.0 + norm_sq(v).sqrt()));
    }

    #[test]
    fn float_format_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        let back: f64 = fmt_f64(x).parse().unwrap();
        prop_assert!(back.to_bits() == bits || (x.is_nan() && back.is_nan()));
    }

    #[test]
    fn parsers_never_panic(text in "\\PC{0,200}") {
        let _ = parse_config_str(&text);
        let _ = parse_ledger(&text);
        let _ = parse_snapshot(&text);
    }

    #[test]
    fn csv_like_inputs_never_panic(rows in prop::collection::vec(prop::collection::vec("[0-9eE.+-]{0,6}|NaN|inf", 0..12), 0..5)) {
        let body: Vec<String> = rows.iter().map(|r| r.join(",")).collect();
        let ledger = format!("step,t,l2(0),sigma(0),energy(0),moment(mass),dissipation,p_sigma_sq,q_sigma_sq,gamma_work,transport_defect\n{}", body.join("\n"));
        if let Ok(l) = parse_ledger(&ledger) {
            let first = ledger_to_csv(&l);
            prop_assert_eq!(ledger_to_csv(&parse_ledger(&first).unwrap()), first);
        }
        let snapshot = format!("cell,x1,x2,volume,node,v1,v2,v3,f\n{}", body.join("\n"));
        if let Ok(s) = parse_snapshot(&snapshot) {
            let first = snapshot_to_csv(&s);
            prop_assert_eq!(snapshot_to_csv(&parse_snapshot(&first).unwrap()), first);
        }
    }

    #[test]
    fn ledger_round_trip_is_byte_stable(
        values in prop::collection::vec(any::<f64>(), 1..40),
        theta in prop::collection::btree_set(-8i32..8, 1..4),
    ) {
        let theta: Vec<f64> = theta.into_iter().map(|t| t as f64 / 2.0).collect();
        let nt = theta.len();
        let pick = |i: usize| values[i % values.len()];
        let rows = (0..3)
            .map(|r| LedgerRow {
                step: r,
                t: pick(r),
                l2: (0..nt).map(|k| pick(r + k)).collect(),
                sigma: (0..nt).map(|k| pick(r + k + 1)).collect(),
                energy: (0..nt).map(|k| pick(r + k + 2)).collect(),
                moments: vec![pick(r + 3)],
                dissipation: pick(r + 4),
                p_sigma_sq: pick(r + 5),
                q_sigma_sq: pick(r + 6),
                gamma_work: pick(r + 7),
                transport_defect: pick(r + 8),
            })
            .collect();
        let ledger = EnergyLedger { theta, moment_names: vec!["mass".into()], rows };
        let first = ledger_to_csv(&ledger);
        let parsed = parse_ledger(&first).unwrap();
        prop_assert_eq!(ledger_to_csv(&parsed), first);
    }

    #[test]
    fn valid_configs_round_trip(
        seed in 0..=i64::MAX as u64,
        disk in any::<bool>(),
        cells in 2usize..64,
        n in 4usize..40,
        steps in 0usize..500,
        dt_index in 0usize..4,
        energy in 0.0f64..10.0,
    ) {
        let mut c = RunConfig::default();
        c.seed = seed;
        c.domain.kind = if disk { DomainKind::Disk } else { DomainKind::Slab };
        c.domain.cells = cells;
        c.grid.n_per_axis = n;
        c.time.dt = [0.01, 0.02, 0.05, 0.125][dt_index];
        c.time.t_end = steps as f64 * c.time.dt;
        c.initial.energy = energy;
        c.initial.kind = if disk { InitialKind::Rotation } else { InitialKind::Microscopic };
        prop_assume!(c.validate().is_ok());
        let text = c.to_toml();
        prop_assert_eq!(parse_config_str(&text).unwrap(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn l_is_symmetric_and_nonnegative(a in prop::collection::vec(-1.0f64..1.0, 216), b in prop::collection::vec(-1.0f64..1.0, 216)) {
        let grid = VelocityGrid::new(6, 6.0).unwrap();
        let op = CollisionOperator::from_grid(&grid);
        let la = op.apply_l(&a).unwrap();
        let lb = op.apply_l(&b).unwrap();
        let (ab, ba) = (grid.inner(&la, &b), grid.inner(&a, &lb));
        let scale = grid.inner(&la, &la).sqrt() * grid.inner(&b, &b).sqrt();
        prop_assert!((ab - ba).abs() <= 1e-12 * scale.max(1e-300));
        prop_assert!(grid.inner(&la, &a) >= -1e-13 * scale.max(1e-300));
    }

    #[test]
    fn macroscopic_projection_is_idempotent(a in prop::collection::vec(-1.0f64..1.0, 216)) {
        let grid = VelocityGrid::new(6, 6.0).unwrap();
        let basis = build_macro_basis(&grid).unwrap();
        let (p, _) = project_p(&a, &basis).unwrap();
        let (pp, _) = project_p(&p, &basis).unwrap();
        for (x, y) in p.iter().zip(&pp) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn removal_zeroes_every_conserved_moment(values in prop::collection::vec(-1.0f64..1.0, 9 * 64), disk in any::<bool>()) {
        let domain = if disk { Domain::Disk { radius: 1.0, cells: 3 } } else { Domain::Slab { length: 1.0, cells: 9 } };
        let mesh = SpatialMesh::new(domain).unwrap();
        let grid = VelocityGrid::new(4, 4.0).unwrap();
        let len = mesh.len() * grid.len();
        let f = DistributionField::with_values(mesh, grid, values[..len].to_vec()).unwrap();
        let modes = conserved_modes(&f).unwrap();
        let g = remove_conserved(&f, &modes).unwrap();
        for m in modes.moments(&g).unwrap() {
            prop_assert!(m.abs() <= 1e-12 * f.norm().max(1.0));
        }
        let h = remove_conserved(&g, &modes).unwrap();
        for (x, y) in g.values.iter().zip(&h.values) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

/// The checked-in fuzz seeds exercise the same round trips as the fuzz targets.
#[test]
fn fuzz_corpus_round_trips() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let mut seen = 0;
    for target in ["parse_config", "read_snapshot", "read_ledger"] {
        for entry in std::fs::read_dir(root.join(target)).unwrap() {
            let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
            seen += 1;
            match target {
                "parse_config" => {
                    if let Ok(c) = parse_config_str(&text) {
                        assert_eq!(parse_config_str(&c.to_toml()).unwrap(), c);
                    }
                }
                "read_snapshot" => {
                    if let Ok(rows) = parse_snapshot(&text) {
                        let first = snapshot_to_csv(&rows);
                        assert_eq!(snapshot_to_csv(&parse_snapshot(&first).unwrap()), first);
                    }
                }
                _ => {
                    if let Ok(l) = parse_ledger(&text) {
                        let first = ledger_to_csv(&l);
                        assert_eq!(ledger_to_csv(&parse_ledger(&first).unwrap()), first);
                    }
                }
            }
        }
    }
    assert!(seen >= 9);
}
