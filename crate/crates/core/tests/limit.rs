use rootbarrier::*;

fn options(style: PartitionStyle, levels: usize, record_every: usize) -> LimitOptions {
    LimitOptions {
        n0: 4,
        levels,
        style,
        record_every,
        x_stride: 5,
        reach: 4.0,
        s_cells: 32,
        tolerances: Tolerances::default(),
    }
}

fn gaussian_setup() -> (MarginalFamily, SpaceTimeGrid) {
    let family = MarginalFamily::gaussian_shift(1.0).unwrap();
    let grid = make_grid(&family, 1.25, 0.04, grid::DEFAULT_NODE_BUDGET).unwrap();
    (family, grid)
}

#[test]
fn gaussian_limit_matches_closed_form() {
    let (family, grid) = gaussian_setup();
    let limit = solve_limit(&family, &grid, &options(PartitionStyle::Uniform, 4, 25)).unwrap();
    assert_eq!(limit.finest.partition().len(), 32);
    let mut worst: f64 = 0.0;
    for (a, &s) in limit.s_nodes.iter().enumerate() {
        for b in 0..limit.t_index.len() {
            for c in 0..limit.x_index.len() {
                let exact = gaussian::potential(1.0 + s.min(limit.t(b)), limit.x(c));
                worst = worst.max((limit.at(a, b, c) - exact).abs());
            }
        }
    }
    assert!(worst <= 1e-2, "{worst}");
    let diffs: Vec<f64> = limit.history.iter().filter_map(|h| h.cauchy_diff).collect();
    assert_eq!(diffs.len(), 3);
    assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    assert!(!limit.outside_assumptions);
}

#[test]
fn boundary_rows_hold_the_initial_potential() {
    let family = MarginalFamily::three_point(0.1, 0.4).unwrap();
    let grid = make_grid(&family, 1.0, 0.04, grid::DEFAULT_NODE_BUDGET).unwrap();
    let limit = solve_limit(&family, &grid, &options(PartitionStyle::Uniform, 2, 25)).unwrap();
    assert_eq!(limit.t_index[0], 0);
    for c in 0..limit.x_index.len() {
        let u0 = family.potential(0.0, limit.x(c)).unwrap();
        for a in 0..limit.s_nodes.len() {
            assert_eq!(limit.at(a, 0, c), u0);
        }
        for b in 0..limit.t_index.len() {
            assert_eq!(limit.at(0, b, c), u0);
        }
    }
}

#[test]
fn gaussian_residual_bounds_and_regularity() {
    let (family, grid) = gaussian_setup();
    let limit = solve_limit(&family, &grid, &options(PartitionStyle::Uniform, 3, 25)).unwrap();
    let tol = Tolerances::default();
    let residual = pde_residual(&limit, &family, &tol).unwrap();
    assert!(residual.pass, "{residual:?}");
    let bounds = bounds_check(&limit, &family, tol.pde(&grid, limit.finest.partition().mesh())).unwrap();
    assert_eq!(bounds.gaussian_floor.violations, 0);
    assert_eq!(bounds.terminal_below.violations, 0);
    assert_eq!(bounds.initial_above.violations, 0);
    assert!(bounds.pass_smoothed);
    let reg = regularity_report(&limit);
    assert!(reg.x_ratio <= 1.0 + 1e-6);
    assert!(reg.t_ratio <= (2.0 / std::f64::consts::PI).sqrt() + tol.scheme(&grid));
    assert!(reg.s_increment_max <= 1e-9);
    assert!(reg.envelope_ratio.unwrap() <= 1.0 + 1e-9);
}

#[test]
fn residual_shrinks_with_the_grid() {
    let family = MarginalFamily::gaussian_shift(1.0).unwrap();
    let mut residuals = Vec::new();
    for (dx, n0) in [(0.08, 2), (0.04, 4), (0.02, 8)] {
        let grid = make_grid(&family, 1.0, dx, grid::DEFAULT_NODE_BUDGET).unwrap();
        let every = (0.125 / grid.dt).round() as usize;
        let opts =
            LimitOptions { n0, x_stride: (0.16 / dx).round() as usize, ..options(PartitionStyle::Uniform, 2, every) };
        let limit = solve_limit(&family, &grid, &opts).unwrap();
        residuals.push(pde_residual(&limit, &family, &Tolerances::default()).unwrap().max_abs);
    }
    for w in residuals.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 0.5, "{residuals:?}");
    }
}

#[test]
fn constant_family_is_flat() {
    let family = MarginalFamily::constant(AtomicMeasure::symmetric_pair(1.0).unwrap());
    let grid = make_grid(&family, 1.0, 0.05, grid::DEFAULT_NODE_BUDGET).unwrap();
    let limit = solve_limit(&family, &grid, &options(PartitionStyle::Uniform, 3, 40)).unwrap();
    assert_eq!(limit.level_count(), 1);
    for a in 0..limit.s_nodes.len() {
        for b in 0..limit.t_index.len() {
            for c in 0..limit.x_index.len() {
                assert_eq!(limit.at(a, b, c), family.potential(0.0, limit.x(c)).unwrap());
            }
        }
    }
    let tol = Tolerances::default();
    let r = pde_residual(&limit, &family, &tol).unwrap();
    assert!(r.min_heat >= -r.tolerance && r.min_s_term >= -r.tolerance);
    assert!(r.max_abs <= r.tolerance);
}

#[test]
fn too_few_levels() {
    let (family, grid) = gaussian_setup();
    assert!(matches!(solve_limit(&family, &grid, &options(PartitionStyle::Uniform, 1, 25)), Err(Error::Domain(_))));
}

#[test]
fn partition_styles_agree() {
    let (family, grid) = gaussian_setup();
    let (report, uniform, geometric) =
        partition_independence(&family, &grid, &options(PartitionStyle::Uniform, 4, 25)).unwrap();
    assert!(report.distance <= 2e-2, "{report:?}");
    assert!(report.within_bound);
    assert!(geometric.finest.partition().mesh() > uniform.finest.partition().mesh());

    let family = MarginalFamily::two_atom();
    let grid = make_grid(&family, 2.0, 0.05, grid::DEFAULT_NODE_BUDGET).unwrap();
    let (report, _, _) = partition_independence(&family, &grid, &options(PartitionStyle::Uniform, 3, 40)).unwrap();
    assert!(report.within_bound, "{report:?}");
}

#[test]
fn singular_scaling_is_flagged_but_runs() {
    let family = MarginalFamily::scaled_base(0.0, BaseLaw::StandardNormal).unwrap();
    let grid = make_grid(&family, 1.0, 0.05, grid::DEFAULT_NODE_BUDGET).unwrap();
    let result = solve_limit(&family, &grid, &options(PartitionStyle::Uniform, 2, 40));
    match result {
        Ok(limit) => assert!(limit.outside_assumptions),
        Err(e) => panic!("{e}"),
    }
}
