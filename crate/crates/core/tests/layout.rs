//! The Gell-Mann index layout is part of the term-dump format; pin it.

use serde::Deserialize;
use vibqudit::gm::gell_mann_basis;

#[derive(Deserialize)]
struct Golden {
    d: usize,
    matrices: Vec<GoldenMatrix>,
}

#[derive(Deserialize)]
struct GoldenMatrix {
    index: usize,
    entries: Vec<(usize, usize, f64, f64)>,
}

#[test]
fn d3_layout_matches_golden_file() {
    let text = include_str!("golden/gell_mann_d3.json");
    let golden: Golden = serde_json::from_str(text).unwrap();
    let basis = gell_mann_basis(golden.d).unwrap();
    assert_eq!(basis.len(), golden.matrices.len());
    for g in &golden.matrices {
        let m = basis.matrix(g.index);
        let mut expected = vec![vec![(0.0, 0.0); golden.d]; golden.d];
        for &(r, c, re, im) in &g.entries {
            expected[r][c] = (re, im);
        }
        for r in 0..golden.d {
            for c in 0..golden.d {
                let z = m[(r, c)];
                let (re, im) = expected[r][c];
                assert!(
                    (z.re - re).abs() < 1e-15 && (z.im - im).abs() < 1e-15,
                    "λ_{} at ({r},{c}): {z} vs {re}+{im}i",
                    g.index
                );
            }
        }
    }
}
