use polaron::model::{r_matrix, transfer};
use polaron::superlinalg::{graded_tensor, super_transpose, super_transpose_inv, supertrace, Layout};
use polaron::{grassmann_g, AlgebraElement, Amplitudes, GradedSpace, ModelParams, Monomial, SuperMatrix, C64};
use proptest::prelude::*;

fn cplx() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn element() -> impl Strategy<Value = AlgebraElement> {
    prop::array::uniform9(cplx())
        .prop_map(|c| Monomial::ALL.iter().zip(c).fold(AlgebraElement::zero(), |acc, (&m, z)| acc + AlgebraElement::monomial(m, z)))
}

fn odd() -> impl Strategy<Value = AlgebraElement> {
    element().prop_map(|x| x.parity_project(polaron::Parity::Odd))
}

fn even() -> impl Strategy<Value = AlgebraElement> {
    element().prop_map(|x| x.parity_project(polaron::Parity::Even))
}

/// Even supermatrix on `(C^{1|1})^{⊗k}`: even entries on parity-preserving
/// positions, odd entries elsewhere.
fn even_matrix(k: usize) -> impl Strategy<Value = SuperMatrix> {
    let space = Layout::uniform(k).space();
    let d = space.dim();
    (prop::collection::vec(even(), d * d), prop::collection::vec(odd(), d * d)).prop_map(move |(e, o)| {
        SuperMatrix::from_fn(
            space.clone(),
            space.clone(),
            |i, j| {
                if space.parity(i) == space.parity(j) {
                    e[i * d + j]
                } else {
                    o[i * d + j]
                }
            },
        )
    })
}

fn close(a: &AlgebraElement, b: &AlgebraElement, tol: f64) -> bool {
    (*a - *b).max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_is_associative(a in element(), b in element(), c in element()) {
        prop_assert!(close(&((a * b) * c), &(a * (b * c)), 1e-12));
    }

    #[test]
    fn product_distributes(a in element(), b in element(), c in element()) {
        prop_assert!(close(&(a * (b + c)), &(a * b + a * c), 1e-12));
    }

    #[test]
    fn odd_elements_anticommute(x in odd(), y in odd()) {
        prop_assert!(close(&(x * y), &(-(y * x)), 1e-12));
        prop_assert!((x * x).max_abs() < 1e-12);
    }

    #[test]
    fn soul_is_nilpotent(a in element()) {
        let s = a.soul();
        prop_assert!((s * s * s).max_abs() < 1e-12);
    }

    #[test]
    fn inverse_when_body_nonzero(a in element()) {
        prop_assume!(a.body().norm() > 0.1);
        let inv = a.inverse().unwrap();
        prop_assert!(close(&(a * inv), &AlgebraElement::one(), 1e-9));
    }

    #[test]
    fn g_is_central(a in element(), amps in prop::array::uniform4(cplx())) {
        let g = grassmann_g(&Amplitudes { a_plus: amps[0], b_plus: amps[1], a_minus: amps[2], b_minus: amps[3] });
        prop_assert!(close(&(g * a), &(a * g), 1e-12));
        prop_assert!((g * g).max_abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip(a in element()) {
        let s = serde_json::to_string(&a).unwrap();
        let b: AlgebraElement = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn graded_tensor_is_associative(a in even_matrix(1), b in even_matrix(1), c in even_matrix(1)) {
        let l = graded_tensor(&graded_tensor(&a, &b), &c);
        let r = graded_tensor(&a, &graded_tensor(&b, &c));
        prop_assert!((&l - &r).max_abs() < 1e-12 * (1.0 + l.max_abs()));
    }

    #[test]
    fn supertrace_is_cyclic(a in even_matrix(2), b in even_matrix(2)) {
        let ab = supertrace(&a.matmul(&b)).unwrap();
        let ba = supertrace(&b.matmul(&a)).unwrap();
        prop_assert!(close(&ab, &ba, 1e-11));
    }

    #[test]
    fn super_transpose_inverts(m in even_matrix(2), k in 0usize..2) {
        let layout = Layout::uniform(2);
        let back = super_transpose_inv(&super_transpose(&m, k, &layout).unwrap(), k, &layout).unwrap();
        prop_assert!((&back - &m).max_abs() < 1e-14);
    }

    #[test]
    fn r_matrix_is_even(u in cplx(), eta in (0.1..1.3f64, -0.3..0.3f64)) {
        let r = r_matrix(u * 0.5, C64::new(eta.0, eta.1)).unwrap();
        prop_assert!(r.is_grade_consistent(0.0));
        prop_assert_eq!(r.rows(), &GradedSpace::local().product(&GradedSpace::local()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transfer_matrices_commute(
        u in (-1.0..1.0f64, -0.3..0.3f64),
        v in (-1.0..1.0f64, -0.3..0.3f64),
        amps in prop::array::uniform4((0.5..1.5f64, -0.3..0.3f64)),
    ) {
        let amps = amps.map(|(a, b)| C64::new(a, b));
        let p = ModelParams::new(
            3,
            C64::new(0.3, 0.1),
            C64::new(0.7, 0.2),
            C64::new(1.1, -0.3),
            Amplitudes { a_plus: amps[0], b_plus: amps[1], a_minus: amps[2], b_minus: amps[3] },
        );
        let tu = transfer(C64::new(u.0, u.1), &p).unwrap();
        let tv = transfer(C64::new(v.0, v.1), &p).unwrap();
        prop_assert!(tu.commutator(&tv).max_abs() < 1e-10 * (1.0 + tu.max_abs() * tv.max_abs()));
    }
}
