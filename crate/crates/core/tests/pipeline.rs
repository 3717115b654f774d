use swd_core::distributions::{gaussian_sw2_meanshift, sample_gaussian, GaussianSpec};
use swd_core::estimators::{analyze_chunk, chunk_ranges, PotentialSides};
use swd_core::{analyze, sample_directions, Analysis, Exponent, InferenceReport};

#[test]
fn mean_shift_inference_end_to_end() {
    let (d, n, m, k) = (3, 2000, 1500, 300);
    let shift = [1.2, 0.0, 0.0];
    let truth = gaussian_sw2_meanshift(&shift).unwrap();
    let x = sample_gaussian(&GaussianSpec::standard(d).unwrap(), n, 11, 0).unwrap();
    let y = sample_gaussian(&GaussianSpec::new(shift.to_vec(), 1.0).unwrap(), m, 11, 1).unwrap();
    let dirs = sample_directions(d, k, 11, 2).unwrap();

    let a = analyze(&x, &y, &dirs, 2.0, PotentialSides::Both).unwrap();
    let vc = a.variance().unwrap();
    let at_truth = InferenceReport::new(a.estimate.sw_pp, n, m, k, vc, truth, 0.95).unwrap();
    assert!(at_truth.ci_low <= truth && truth <= at_truth.ci_high, "{at_truth:?}");
    assert!(!at_truth.reject);

    let at_zero = InferenceReport::new(a.estimate.sw_pp, n, m, k, vc, 0.0, 0.95).unwrap();
    assert!(at_zero.reject && at_zero.p_value < 1e-10);
}

#[test]
fn chunks_assemble_in_any_evaluation_order() {
    let d = 4;
    let x = sample_gaussian(&GaussianSpec::standard(d).unwrap(), 120, 3, 0).unwrap();
    let y = sample_gaussian(&GaussianSpec::shifted_first_axis(d, 0.8).unwrap(), 90, 3, 1).unwrap();
    let dirs = sample_directions(d, 100, 3, 2).unwrap();
    let whole = analyze(&x, &y, &dirs, 2.0, PotentialSides::Both).unwrap();

    let ranges: Vec<_> = chunk_ranges(100).collect();
    let mut chunks: Vec<_> = ranges
        .iter()
        .rev()
        .map(|r| analyze_chunk(&x, &y, &dirs, Exponent::TWO, PotentialSides::Both, r.clone()).unwrap())
        .collect();
    chunks.reverse();
    let assembled = Analysis::assemble(120, 90, 100, Exponent::TWO, chunks).unwrap();
    assert_eq!(assembled, whole);
}

#[test]
fn non_quadratic_exponent_has_no_potentials() {
    let x = sample_gaussian(&GaussianSpec::standard(2).unwrap(), 500, 4, 0).unwrap();
    let y = sample_gaussian(&GaussianSpec::standard(2).unwrap(), 400, 4, 1).unwrap();
    let dirs = sample_directions(2, 8, 4, 2).unwrap();
    assert!(analyze(&x, &y, &dirs, 3.0, PotentialSides::Source).is_err());
    let a = analyze(&x, &y, &dirs, 3.0, PotentialSides::None).unwrap();
    assert!(a.v_hat_pq_sq.is_none() && a.estimate.sw_pp > 0.0);
    assert!(a.variance().is_err());
    // tau = 8 / (8 + 222) is small enough for the slicing-only variance
    assert!(a.slicing_only_variance().is_ok());

    let many = sample_directions(2, 200, 4, 2).unwrap();
    let a = analyze(&x, &y, &many, 3.0, PotentialSides::None).unwrap();
    assert!(a.slicing_only_variance().is_err());
}
