//! Cross-module property tests: exact geometry laws, sparseness
//! certificates, and form identities on randomized inputs.

use proptest::prelude::*;
use sparse_embed::dyadic::{enumerate_grid, DyadicCube, GridId, Window};
use sparse_embed::mesh::Mesh;
use sparse_embed::sparse::{
    assign_esets, multilinear_form, sparse_operator_apply, verify_sparse, KernelMap,
};
use sparse_embed::weights::{lp_norm, Weight};
use sparse_embed::TestFunction;

fn cube_strategy(d: usize) -> impl Strategy<Value = DyadicCube> {
    let level = -4i32..=8;
    let shift = prop::collection::vec(-1i8..=1, d);
    let index = prop::collection::vec(-40i64..=40, d);
    (level, index, shift).prop_map(|(k, m, s)| DyadicCube::new(k, m, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn children_partition_parent(cube in cube_strategy(2)) {
        let kids = cube.children().unwrap();
        let total: sparse_embed::dyadic::Rat = kids.iter().map(|c| c.volume()).sum();
        prop_assert_eq!(total, cube.volume());
        for (i, a) in kids.iter().enumerate() {
            prop_assert!(cube.contains_cube(a).unwrap());
            prop_assert_eq!(a.parent().unwrap(), cube.clone());
            for b in kids.iter().skip(i + 1) {
                // disjoint: no mutual containment and corners differ
                prop_assert!(!a.contains_cube(b).unwrap());
                prop_assert!(!b.contains_cube(a).unwrap());
            }
        }
    }

    #[test]
    fn containment_is_a_partial_order(a in cube_strategy(1), t1 in 0i32..4, t2 in 0i32..4, pick in any::<u64>()) {
        // build descendants by walking down, so containment must hold
        let mut b = a.clone();
        for i in 0..t1 {
            let kids = b.children().unwrap();
            b = kids[((pick >> i) & 1) as usize].clone();
        }
        let mut c = b.clone();
        for i in 0..t2 {
            let kids = c.children().unwrap();
            c = kids[((pick >> (8 + i)) & 1) as usize].clone();
        }
        prop_assert!(a.contains_cube(&b).unwrap());
        prop_assert!(b.contains_cube(&c).unwrap());
        prop_assert!(a.contains_cube(&c).unwrap());
        // mutual containment only at equality
        if a != b {
            prop_assert!(!b.contains_cube(&a).unwrap());
        }
    }

    #[test]
    fn cube_literal_round_trip(cube in cube_strategy(3)) {
        let text = cube.to_string();
        let back: DyadicCube = text.parse().unwrap();
        prop_assert_eq!(back, cube);
    }

    #[test]
    fn assigned_esets_always_certify(levels in prop::collection::vec((0i32..=5, -10i64..=10), 1..12)) {
        let cubes: Vec<DyadicCube> = levels
            .into_iter()
            .map(|(k, m)| DyadicCube::standard(k, vec![m]).unwrap())
            .collect();
        let fam = assign_esets(&cubes, 6).unwrap();
        let check = verify_sparse(&fam, fam.eta());
        prop_assert!(check.holds, "witness: {:?}", check.witness);
    }

    #[test]
    fn form_monotone_under_enlargement(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cubes: Vec<DyadicCube> = (0..=3)
            .map(|k| DyadicCube::standard(k, vec![0]).unwrap())
            .collect();
        let fam = assign_esets(&cubes, 5).unwrap();
        let kernel = KernelMap::riesz(0.5, 2, 1).unwrap();
        let mesh = Mesh::of_cube(&DyadicCube::unit(1), 5).unwrap();
        let sigmas = [Weight::Lebesgue, Weight::power(0.5, 1).unwrap()];
        let f: Vec<f64> = (0..mesh.len()).map(|_| rng.gen::<f64>()).collect();
        let g: Vec<f64> = (0..mesh.len()).map(|_| rng.gen::<f64>()).collect();
        let bigger: Vec<f64> = f.iter().map(|v| v + rng.gen::<f64>()).collect();
        let tf = |v: Vec<f64>| TestFunction::from_values(mesh.clone(), v).unwrap();
        let base = multilinear_form(&fam, &kernel, &sigmas, &[tf(f), tf(g.clone())], 1e-10).unwrap();
        let grown = multilinear_form(&fam, &kernel, &sigmas, &[tf(bigger), tf(g)], 1e-10).unwrap();
        prop_assert!(grown >= base - 1e-12 * base.abs());
    }
}

#[test]
fn enumeration_parent_closure_all_grids_2d() {
    let window = Window::with_radius_int(0, 3, 1).unwrap();
    for grid in GridId::all(2) {
        let cubes = enumerate_grid(&grid, &window).unwrap();
        let set: std::collections::HashSet<_> = cubes.iter().cloned().collect();
        for c in &cubes {
            if c.level() > window.k_min {
                assert!(set.contains(&c.parent().unwrap()));
            }
        }
    }
}

#[test]
fn duality_pairing_matches_form_bilinear_2d() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let window = Window::with_radius_int(0, 4, 1).unwrap();
    let grid = GridId::standard(2);
    let mesh = Mesh::from_window(grid, &window, 4).unwrap();
    let cubes: Vec<DyadicCube> = (0..12)
        .map(|_| {
            let k = rng.gen_range(0..=3);
            let hi = 1i64 << k;
            DyadicCube::standard(k, vec![rng.gen_range(-hi..hi), rng.gen_range(-hi..hi)]).unwrap()
        })
        .collect();
    let fam = assign_esets(&cubes, 4).unwrap();
    let kernel = KernelMap::riesz(1.0, 2, 2).unwrap();
    let sigmas = [Weight::power(-0.5, 2).unwrap(), Weight::Lebesgue];
    for _ in 0..3 {
        let fns: Vec<TestFunction> = (0..2)
            .map(|_| {
                let vals: Vec<f64> = (0..mesh.len()).map(|_| rng.gen::<f64>()).collect();
                TestFunction::from_values(mesh.clone(), vals).unwrap()
            })
            .collect();
        let form = multilinear_form(&fam, &kernel, &sigmas, &fns, 1e-10).unwrap();
        let applied =
            sparse_operator_apply(&fam, &kernel, &sigmas[..1], &fns[..1], &window, 1e-10).unwrap();
        let masses = sigmas[1].cell_masses(&mesh, 1e-10).unwrap();
        let paired: f64 = applied
            .values
            .iter()
            .zip(&fns[1].values)
            .zip(&masses)
            .map(|((a, f), m)| a * f * m)
            .sum();
        assert!(
            (paired - form).abs() <= 1e-12 * form.abs().max(1e-300),
            "paired {paired} vs form {form}"
        );
    }
}

#[test]
fn lp_norm_between_value_bounds() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let window = Window::with_radius_int(0, 5, 1).unwrap();
    let mesh = Mesh::from_window(GridId::standard(1), &window, 5).unwrap();
    let vals: Vec<f64> = (0..mesh.len()).map(|_| 0.1 + rng.gen::<f64>()).collect();
    let f = TestFunction::from_values(mesh.clone(), vals.clone()).unwrap();
    let sigma = Weight::power(0.5, 1).unwrap();
    let total_mass: f64 = sigma.cell_masses(&mesh, 1e-10).unwrap().iter().sum();
    for p in [1.5, 2.0, 4.0] {
        let n = lp_norm(&f, &sigma, p, 1e-10).unwrap();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min) * total_mass.powf(1.0 / p);
        let hi = vals.iter().cloned().fold(0.0, f64::max) * total_mass.powf(1.0 / p);
        assert!(n >= lo - 1e-12 && n <= hi + 1e-12);
    }
}
