use num_complex::Complex64;
use proptest::prelude::*;

use hwlab::calkin::{fredholm_index, parse_word, symbol_of, winding_number, Lollipop, SymbolPair};
use hwlab::linalg::op_norm;
use hwlab::quad::gauss_legendre;
use hwlab::scan::{pseudospectrum, ScanGrid};

fn word_text() -> impl Strategy<Value = String> {
    let letter = prop::sample::select(vec!["Mx", "H", "V", "I"]);
    let monomial = (any::<bool>(), 0u32..=3, prop::collection::vec(letter, 1..=3))
        .prop_map(|(neg, c, ls)| (if neg { " - " } else { " + " }, format!("{c}*{}", ls.join("*"))));
    prop::collection::vec(monomial, 1..=3).prop_map(|ms| {
        let mut text = String::new();
        for (k, (sign, m)) in ms.iter().enumerate() {
            if k > 0 || sign.contains('-') {
                text.push_str(sign.trim_start());
            }
            text.push_str(m);
        }
        text
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symbol_is_multiplicative(a in word_text(), b in word_text()) {
        let (wa, wb) = (parse_word(&a).unwrap(), parse_word(&b).unwrap());
        prop_assert_eq!(symbol_of(&wa.mul(&wb)), symbol_of(&wa).mul(&symbol_of(&wb)));
    }

    #[test]
    fn symbol_is_additive(a in word_text(), b in word_text()) {
        let (wa, wb) = (parse_word(&a).unwrap(), parse_word(&b).unwrap());
        prop_assert_eq!(symbol_of(&wa.add(&wb)), symbol_of(&wa).add(&symbol_of(&wb)));
    }

    #[test]
    fn parsing_a_sum_is_summing_the_parses(a in word_text(), b in word_text()) {
        let joined = parse_word(&format!("({a}) + ({b})")).unwrap();
        let summed = parse_word(&a).unwrap().add(&parse_word(&b).unwrap());
        prop_assert_eq!(joined, summed);
    }

    #[test]
    fn compression_is_linear(a in word_text(), b in word_text()) {
        let (wa, wb) = (parse_word(&a).unwrap(), parse_word(&b).unwrap());
        let n = 8;
        let lhs = wa.add(&wb).compress(n).unwrap();
        let rhs = wa.compress(n).unwrap() + wb.compress(n).unwrap();
        let scale = op_norm(&lhs).max(1.0);
        prop_assert!(op_norm(&(lhs - rhs)) < 1e-12 * scale);
    }

    #[test]
    fn gauss_rule_is_exact_to_degree_2n_minus_1(n in 1usize..40, k in 0usize..80) {
        prop_assume!(k < 2 * n);
        let rule = gauss_legendre::<f64>(n);
        let s: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
        // on [-1, 1]
        let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
        prop_assert!((s - exact).abs() < 1e-12, "n={} k={} {} vs {}", n, k, s, exact);
    }

    #[test]
    fn index_is_stable_under_refinement(re in -2.0f64..3.0, im in -1.8f64..1.8) {
        let z = Complex64::new(re, im);
        prop_assume!(Lollipop.distance(z) > 1e-3 && Lollipop.boundary_distance(z) > 1e-3);
        let f = SymbolPair::identity();
        let (k1, _) = winding_number(&f, z, 256).unwrap();
        let (k2, _) = winding_number(&f, z, 4096).unwrap();
        prop_assert_eq!(k1, k2);
        let expected = i64::from(Lollipop.in_bulb_interior(z));
        prop_assert_eq!(fredholm_index(&f, z).unwrap(), expected);
    }

    #[test]
    fn index_is_additive_over_products(re in 0.1f64..1.9, im in -0.9f64..0.9) {
        let z = Complex64::new(re, im);
        prop_assume!(im.abs() > 1e-2 && Lollipop.boundary_distance(z) > 1e-2);
        // f² - z² = (f - z)(f + z)
        let id = SymbolPair::identity();
        let sq = id.mul(&id);
        let expected = fredholm_index(&id, z).unwrap() + fredholm_index(&id, -z).unwrap();
        prop_assert_eq!(fredholm_index(&sq, z * z).unwrap(), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn real_words_scan_symmetrically(w in word_text()) {
        let word = parse_word(&w).unwrap();
        let grid = ScanGrid::new((-1.0, 2.0), (-1.0, 1.0), 5, 5).unwrap();
        let r = pseudospectrum(&word, &grid, 12).unwrap();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let a = r.sigma_min[j * grid.nx + i];
                let b = r.sigma_min[(grid.ny - 1 - j) * grid.nx + i];
                prop_assert!((a - b).abs() < 1e-10, "{}: {} vs {}", w, a, b);
            }
        }
    }
}
