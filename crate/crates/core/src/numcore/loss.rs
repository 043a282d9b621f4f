use crate::error::{Error, Result};
use crate::numcore::activation::softmax_rows;
use crate::numcore::Tensor;

/// Mean categorical cross-entropy and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    if logits.ndim() != 2 || logits.dim(0) != labels.len() {
        return Err(Error::dim(format!(
            "logits {:?} vs {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    let (b, k) = (logits.dim(0), logits.dim(1));
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Label {
            label: bad,
            classes: k,
        });
    }
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - row[label];
    }
    let mut grad = softmax_rows(logits)?;
    for (r, &label) in labels.iter().enumerate() {
        grad.row_mut(r)[label] -= 1.0;
    }
    let inv_b = 1.0 / b as f64;
    grad.data_mut().iter_mut().for_each(|g| *g *= inv_b);
    Ok((loss * inv_b, grad))
}

/// Mean binary cross-entropy on raw logits, in the stable
/// `max(z,0) - z·y + ln(1 + e^{-|z|})` form.
pub fn binary_cross_entropy(logits: &Tensor, labels: &[u8]) -> Result<(f64, Tensor)> {
    if logits.ndim() != 2 || logits.dim(1) != 1 || logits.dim(0) != labels.len() {
        return Err(Error::dim(format!(
            "gender logits {:?} vs {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Label {
            label: bad as usize,
            classes: 2,
        });
    }
    let b = labels.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(labels.len());
    for (&z, &y) in logits.data().iter().zip(labels) {
        let y = y as f64;
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        grad.push((crate::numcore::sigmoid(z) - y) / b);
    }
    Ok((loss / b, Tensor::new(vec![labels.len(), 1], grad)?))
}

/// Equal-weight sum of the identification and gender losses.
pub fn joint_loss(l_id: f64, l_gender: f64) -> f64 {
    l_id + l_gender
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let (loss, _) = softmax_cross_entropy(&Tensor::zeros(&[1, 58]), &[7]).unwrap();
        assert!((loss - 58f64.ln()).abs() < 1e-12);
        assert!((loss - 4.0604).abs() < 1e-4);
    }

    #[test]
    fn large_margin_drives_loss_to_zero() {
        let mut prev = f64::INFINITY;
        for margin in [1.0, 10.0, 100.0, 1000.0] {
            let t = Tensor::new(vec![1, 3], vec![margin, 0.0, 0.0]).unwrap();
            let (loss, _) = softmax_cross_entropy(&t, &[0]).unwrap();
            assert!(loss.is_finite() && loss <= prev);
            prev = loss;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            softmax_cross_entropy(&Tensor::zeros(&[1, 3]), &[3]),
            Err(Error::Label { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn grad_rows_sum_to_zero() {
        let t = Tensor::new(vec![2, 3], vec![0.3, -1.2, 2.0, 5.0, 5.0, -3.0]).unwrap();
        let (_, g) = softmax_cross_entropy(&t, &[2, 0]).unwrap();
        for r in 0..2 {
            assert!(g.row(r).iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn bce_at_zero_is_ln2() {
        for y in [0u8, 1] {
            let (loss, _) = binary_cross_entropy(&Tensor::zeros(&[1, 1]), &[y]).unwrap();
            assert!((loss - 2f64.ln()).abs() < 1e-15);
            assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_limit() {
        let (loss, _) = binary_cross_entropy(&Tensor::filled(&[1, 1], 60.0), &[1]).unwrap();
        assert!(loss < 1e-20);
        let (loss, _) = binary_cross_entropy(&Tensor::filled(&[1, 1], -800.0), &[1]).unwrap();
        assert!((loss - 800.0).abs() < 1e-9);
    }

    #[test]
    fn joint_is_plain_sum() {
        assert_eq!(joint_loss(2.0, 0.5), 2.5);
        assert_eq!(joint_loss(0.0, 0.0), 0.0);
        let j = joint_loss(58f64.ln(), 2f64.ln());
        assert!((j - 4.7536).abs() < 1e-4);
    }
}
