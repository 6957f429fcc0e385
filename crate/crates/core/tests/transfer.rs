mod common;

use common::{data, labeled};
use kt_core::linalg::pinv;
use kt_core::{
    fit_combined, fit_combined_scaled, fit_exact, fit_projected, fit_translated, gram,
    predict_transfer, BlockScales, DataMatrix, KernelModel, KernelSpec, LabeledDataset,
    TransferModel,
};
use nalgebra::DMatrix;

fn linear_source(d: usize, c: usize, n: usize, seed: u64) -> KernelModel {
    fit_exact(&KernelSpec::Linear, &labeled(d, c, n, seed), 0.0).unwrap()
}

#[test]
fn projected_linear_matches_pinv_composition() {
    let source = linear_source(12, 4, 8, 1);
    let target = labeled(12, 3, 6, 2);
    let model = fit_projected(&source, &target, &KernelSpec::Linear, 0.0).unwrap();
    let ws = source.linear_weights().unwrap().0;
    let xt = target.x.as_matrix();
    let wp = target.y.as_matrix() * pinv(&(&ws * xt));
    let query = data(12, 9, 3);
    let want = &wp * &ws * query.as_matrix();
    let got = predict_transfer(&model, &query).unwrap();
    assert!((got.as_matrix() - &want).amax() <= 1e-10 * want.amax().max(1.0));
}

#[test]
fn translated_linear_matches_correction_formula() {
    let source = linear_source(15, 3, 10, 4);
    let target = labeled(15, 3, 7, 5);
    let model = fit_translated(&source, &target, &KernelSpec::Linear, 0.0).unwrap();
    let ws = source.linear_weights().unwrap().0;
    let xt = target.x.as_matrix();
    let w = &ws + (target.y.as_matrix() - &ws * xt) * pinv(xt);
    let query = data(15, 5, 6);
    let want = &w * query.as_matrix();
    let got = predict_transfer(&model, &query).unwrap();
    assert!((got.as_matrix() - &want).amax() <= 1e-10 * want.amax().max(1.0));
}

#[test]
fn translated_is_closest_interpolant_to_source() {
    for s in 0..10 {
        let d = 10 + s as usize;
        let n = 4 + s as usize % 5;
        let source = linear_source(d, 2, d / 2, 100 + s);
        let target = labeled(d, 2, n, 200 + s);
        let model = fit_translated(&source, &target, &KernelSpec::Linear, 0.0).unwrap();
        let TransferModel::Translated { correction, .. } = &model else {
            panic!("wrong variant")
        };
        let ws = source.linear_weights().unwrap().0;
        let w = &ws + correction.linear_weights().unwrap().0;
        let xt = target.x.as_matrix();
        assert!((&w * xt - target.y.as_matrix()).amax() <= 1e-8);
        let proj = xt * pinv(xt);
        let delta = &w - &ws;
        assert!((&delta - &delta * &proj).amax() <= 1e-8);
    }
}

#[test]
fn boosting_identity() {
    let source = fit_exact(&KernelSpec::laplace(3.0).unwrap(), &labeled(4, 2, 20, 7), 1e-4).unwrap();
    let target = labeled(4, 2, 15, 8);
    let spec = KernelSpec::laplace(1.5).unwrap();
    let model = fit_translated(&source, &target, &spec, 1e-2).unwrap();
    let TransferModel::Translated { correction, .. } = &model else {
        panic!("wrong variant")
    };
    let resid_set = LabeledDataset::new(
        DataMatrix::new(target.x.as_matrix().clone()).unwrap(),
        DataMatrix::new(target.y.as_matrix() - source.predict(&target.x).unwrap().as_matrix()).unwrap(),
    )
    .unwrap();
    let own = correction.residual(&resid_set).unwrap();
    let pred = predict_transfer(&model, &target.x).unwrap();
    let total = (target.y.as_matrix() - pred.as_matrix()).norm();
    assert!((own - total).abs() <= 1e-12 * total.max(1.0));
}

#[test]
fn every_variant_matches_hand_composition() {
    let source = fit_exact(&KernelSpec::ntk(2, 0.1).unwrap(), &labeled(5, 3, 25, 9), 1e-4).unwrap();
    let target = labeled(5, 3, 12, 10);
    let head = KernelSpec::laplace(4.0).unwrap();
    let query = data(5, 7, 11);
    let fs_q = source.predict(&query).unwrap();
    let fs_t = source.predict(&target.x).unwrap();

    let proj = fit_projected(&source, &target, &head, 1e-3).unwrap();
    let TransferModel::Projected { head: h, .. } = &proj else { panic!() };
    let want = h.alpha().as_matrix() * gram(&head, &fs_t, &fs_q).unwrap();
    let got = predict_transfer(&proj, &query).unwrap();
    assert!((got.as_matrix() - want).amax() <= 1e-10);

    let tr = fit_translated(&source, &target, &head, 1e-3).unwrap();
    let TransferModel::Translated { correction, .. } = &tr else { panic!() };
    let want = fs_q.as_matrix() + correction.alpha().as_matrix() * gram(&head, &target.x, &query).unwrap();
    let got = predict_transfer(&tr, &query).unwrap();
    assert!((got.as_matrix() - want).amax() <= 1e-10);

    let scales = BlockScales { source: 0.5, features: 2.0 };
    let comb = fit_combined_scaled(&source, &target, &head, 1e-3, scales).unwrap();
    let TransferModel::Combined { head: h, .. } = &comb else { panic!() };
    let stack = |fs: &DataMatrix, x: &DataMatrix| {
        let mut m = DMatrix::zeros(3 + 5, x.samples());
        m.rows_mut(0, 3).copy_from(&(fs.as_matrix() * 0.5));
        m.rows_mut(3, 5).copy_from(&(x.as_matrix() * 2.0));
        DataMatrix::new(m).unwrap()
    };
    let want = h.alpha().as_matrix()
        * gram(&head, &stack(&fs_t, &target.x), &stack(&fs_q, &query)).unwrap();
    let got = predict_transfer(&comb, &query).unwrap();
    assert!((got.as_matrix() - want).amax() <= 1e-10);
}

#[test]
fn combined_residual_no_worse_than_either() {
    // Linear kernels at ridge zero: the stacked features span both feature sets.
    let source = linear_source(10, 3, 6, 12);
    let target = labeled(10, 3, 14, 13);
    let spec = KernelSpec::Linear;
    let resid = |m: &TransferModel| {
        let p = predict_transfer(m, &target.x).unwrap();
        (target.y.as_matrix() - p.as_matrix()).norm()
    };
    let p = resid(&fit_projected(&source, &target, &spec, 0.0).unwrap());
    let t = resid(&fit_translated(&source, &target, &spec, 0.0).unwrap());
    let c = resid(&fit_combined(&source, &target, &spec, 0.0).unwrap());
    assert!(c <= p.min(t) + 1e-9, "{c} vs {p}, {t}");
}

#[test]
fn projected_accepts_any_label_dims() {
    let source = linear_source(6, 5, 10, 14);
    let target = labeled(6, 2, 8, 15);
    assert!(fit_projected(&source, &target, &KernelSpec::Linear, 0.0).is_ok());
    assert!(fit_combined(&source, &target, &KernelSpec::Linear, 0.0).is_ok());
    assert!(fit_translated(&source, &target, &KernelSpec::Linear, 0.0).is_err());
}

#[test]
fn transfer_model_round_trips_through_json() {
    let source = linear_source(4, 2, 5, 16);
    let target = labeled(4, 2, 6, 17);
    let model = fit_combined(&source, &target, &KernelSpec::laplace(2.0).unwrap(), 1e-4).unwrap();
    let text = serde_json::to_string(&model).unwrap();
    let back: TransferModel = serde_json::from_str(&text).unwrap();
    let q = data(4, 3, 18);
    assert_eq!(predict_transfer(&back, &q).unwrap(), predict_transfer(&model, &q).unwrap());
}
