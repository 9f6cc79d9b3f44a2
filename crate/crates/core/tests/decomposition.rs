use proptest::prelude::*;
use shwx::reference::reference_run_with;
use shwx::runner::{run, RunConfig};
use shwx::InitialCondition;

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn any_layout_matches_reference(
        n in 6usize..40,
        r in 1usize..10,
        h_pick in 0usize..10,
        t in 1usize..5,
        steps in 1usize..12,
    ) {
        let hs: Vec<usize> = (1..=r).filter(|h| r % h == 0 && *h <= n && r / h <= n).collect();
        prop_assume!(!hs.is_empty());
        let mut c = RunConfig::new(n).unwrap();
        c.steps = steps;
        c.ranks = r;
        c.h_override = Some(hs[h_pick % hs.len()]);
        c.threads = t;
        c.collect_fields = true;
        let g = run(&c).unwrap().fields.unwrap();
        let reference = reference_run_with(&c.spec, steps, InitialCondition::Vortex, c.cadence).unwrap();
        prop_assert!(bitwise_eq(&g.p, &reference.p));
        prop_assert!(bitwise_eq(&g.u, &reference.u));
        prop_assert!(bitwise_eq(&g.v, &reference.v));
    }
}

#[test]
fn conservation_series_is_layout_independent_in_mass() {
    let series = |r, h| {
        let mut c = RunConfig::new(24).unwrap();
        c.steps = 30;
        c.ranks = r;
        c.h_override = Some(h);
        c.cadence = 5;
        run(&c).unwrap().conservation
    };
    let a = series(1, 1);
    for (r, h) in [(4, 2), (6, 3), (8, 8)] {
        let b = series(r, h);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.step, y.step);
            assert!(((x.mass - y.mass) / x.mass).abs() < 1e-14);
            assert!(((x.enstrophy - y.enstrophy) / x.enstrophy).abs() < 1e-12);
        }
    }
}

#[test]
fn uneven_blocks_match_reference() {
    // 13 cells over 3 x-blocks and 2 y-blocks leaves remainder rows and columns
    let mut c = RunConfig::new(13).unwrap();
    c.steps = 25;
    c.ranks = 6;
    c.h_override = Some(3);
    c.threads = 4;
    c.collect_fields = true;
    let g = run(&c).unwrap().fields.unwrap();
    let reference = reference_run_with(&c.spec, c.steps, c.initial, c.cadence).unwrap();
    assert!(bitwise_eq(&g.p, &reference.p));
}
