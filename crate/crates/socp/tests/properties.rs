use proptest::prelude::*;
use relayplan_socp::{solve, Affine, ConeProgram, SparseRow, Status};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn box_lp_optimum_is_attained_at_a_vertex(
        c in prop::collection::vec(-5.0f64..5.0, 1..8),
        lo in prop::collection::vec(-3.0f64..0.0, 8),
        width in prop::collection::vec(0.1f64..4.0, 8),
    ) {
        let n = c.len();
        let mut p = ConeProgram::new(n);
        p.objective = c.clone();
        let mut expected = 0.0;
        for j in 0..n {
            let hi = lo[j] + width[j];
            p.add_le(SparseRow::from_pairs([(j, 1.0)]), hi);
            p.add_le(SparseRow::from_pairs([(j, -1.0)]), -lo[j]);
            expected += (c[j] * lo[j]).max(c[j] * hi);
        }
        let sol = solve(&p, 1e-9, 80).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!((sol.objective - expected).abs() <= 1e-6 * (1.0 + expected.abs()));
        prop_assert!(sol.max_violation <= 1e-6);
    }

    #[test]
    fn ball_maximization_matches_closed_form(
        c in prop::collection::vec(-3.0f64..3.0, 2..6),
        center in prop::collection::vec(-2.0f64..2.0, 6),
        radius in 0.1f64..3.0,
    ) {
        // maximize cᵀx  s.t. ‖x − center‖ ≤ radius  → cᵀcenter + radius‖c‖
        let n = c.len();
        let mut p = ConeProgram::new(n);
        p.objective = c.clone();
        let rows = (0..n).map(|j| Affine::new(SparseRow::from_pairs([(j, 1.0)]), -center[j])).collect();
        p.add_soc(rows, Affine::constant(radius));
        let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expected: f64 = c.iter().zip(&center).map(|(a, b)| a * b).sum::<f64>() + radius * cn;
        let sol = solve(&p, 1e-9, 80).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!((sol.objective - expected).abs() <= 1e-6 * (1.0 + expected.abs()));
    }
}
