use proptest::prelude::*;
use schurflow::voxgeo::{connected_components, generate_packing, parse_grid, periodize, render_grid, stats, PackingParams, VoxelGrid};

fn params() -> impl Strategy<Value = PackingParams> {
    (1usize..=4, 8usize..=20, 1usize..=3, 0u64..10_000).prop_flat_map(|(n_cells, cell, n_min, seed)| {
        (n_min..cell - 1).prop_map(move |n_avg| PackingParams::new_2d(n_cells, cell, n_avg, n_min, seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn porosity_depends_only_on_sizes(p in params()) {
        prop_assume!(p.validate().is_ok());
        let st = stats(&generate_packing(&p).unwrap()).unwrap();
        let side = (p.cell - p.n_avg) as f64 / p.cell as f64;
        let expected = 100.0 * (1.0 - side * side);
        prop_assert!((st.porosity_pct - expected).abs() < 1e-9, "{} vs {}", st.porosity_pct, expected);
    }

    #[test]
    fn surface_count_of_separated_squares(p in params()) {
        prop_assume!(p.validate().is_ok());
        let st = stats(&generate_packing(&p).unwrap()).unwrap();
        let expected = p.n_cells * p.n_cells * (4 * (p.cell - p.n_avg) - 4);
        prop_assert_eq!(st.v_surf, expected);
        prop_assert_eq!(st.n_components, 1);
    }

    #[test]
    fn stats_are_translation_invariant(p in params(), dx in 0usize..40, dy in 0usize..40) {
        prop_assume!(p.validate().is_ok());
        let g = generate_packing(&p).unwrap();
        prop_assert_eq!(stats(&g).unwrap(), stats(&g.translated([dx, dy, 0])).unwrap());
    }

    #[test]
    fn periodize_is_idempotent_in_measure(p in params()) {
        prop_assume!(p.validate().is_ok());
        let once = periodize(&generate_packing(&p).unwrap());
        let twice = periodize(&once);
        prop_assert_eq!(once.fluid_count() * 4, twice.fluid_count());
        prop_assert_eq!(stats(&once).unwrap().porosity_pct, stats(&twice).unwrap().porosity_pct);
    }

    #[test]
    fn text_round_trip(p in params()) {
        prop_assume!(p.validate().is_ok());
        let g = generate_packing(&p).unwrap();
        prop_assert_eq!(parse_grid(&render_grid(&g)).unwrap(), g);
    }
}

#[test]
fn table_geometries() {
    let porosity = [15.36, 22.56, 29.44, 36.00, 42.24];
    let stv = [46.875, 30.496, 22.283, 17.333, 13.996];
    for (i, n_avg) in [4, 6, 8, 10, 12].into_iter().enumerate() {
        let st = stats(&generate_packing(&PackingParams::new_2d(7, 50, n_avg, 2, 42)).unwrap()).unwrap();
        assert!((st.porosity_pct - porosity[i]).abs() < 1e-9);
        assert!((st.stv_pct - stv[i]).abs() < 0.05, "{} vs {}", st.stv_pct, stv[i]);
    }
}

#[test]
fn cube_packing_counts() {
    let p = PackingParams { dim: 3, n_cells: 2, cell: 10, n_avg: 4, n_min: 2, seed: 1 };
    let st = stats(&generate_packing(&p).unwrap()).unwrap();
    assert_eq!(st.v_fluid, 8 * (1000 - 216));
    assert_eq!(st.v_surf, 8 * (216 - 64));
}

#[test]
fn components_ignore_solid() {
    let g = VoxelGrid::from_fn(2, 6, |c| c[0] != 2 && c[0] != 5).unwrap();
    let comps = connected_components(&g);
    assert_eq!(comps.count, 2);
    assert_eq!(comps.sizes.iter().sum::<usize>(), g.fluid_count());
}
