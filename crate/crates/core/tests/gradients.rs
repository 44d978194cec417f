mod common;

use common::{max_grad_error, smooth_grad_case, GRAD_KINDS};
use sentcompare::numstat::Rng;

fn check_kind(kind: usize, cases: usize) {
    let mut rng = Rng::new(1000 + kind as u64);
    for _ in 0..cases {
        let case = smooth_grad_case(kind, &mut rng);
        let err = max_grad_error(&case);
        assert!(err < 1e-4, "{}: relative error {err:e}", case.describe());
    }
}

#[test]
fn nli_cls() {
    check_kind(0, 12);
}

#[test]
fn nli_mean() {
    check_kind(1, 12);
}

#[test]
fn nli_max() {
    check_kind(2, 12);
}

#[test]
fn def_tied_all_poolings() {
    for kind in 3..6 {
        check_kind(kind, 12);
    }
}

#[test]
fn def_untied_all_poolings() {
    for kind in 6..GRAD_KINDS {
        check_kind(kind, 12);
    }
}

#[test]
fn mean_pool_with_cls_included() {
    let mut rng = Rng::new(77);
    for _ in 0..10 {
        let mut case = smooth_grad_case(4, &mut rng);
        case.enc.include_cls = true;
        assert!(max_grad_error(&case) < 1e-4, "{}", case.describe());
    }
}
