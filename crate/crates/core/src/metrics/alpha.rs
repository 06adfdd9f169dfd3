use crate::corpus::AnnotationMatrix;
use crate::error::{Error, Result};

/// Krippendorff's alpha for nominal binary data, computed through the
/// coincidence matrix. Instances with fewer than two labels are not
/// pairable and contribute nothing.
pub fn krippendorff_alpha(matrix: &AnnotationMatrix) -> Result<f64> {
    if matrix.num_annotators() < 2 {
        return Err(Error::DegenerateData("alpha needs at least 2 annotators".into()));
    }
    alpha_from_counts((0..matrix.num_instances()).map(|i| matrix.label_counts(i)))
}

/// Alpha from per-unit `(zeros, ones)` counts.
pub fn alpha_from_counts(units: impl IntoIterator<Item = (usize, usize)>) -> Result<f64> {
    // Coincidences: each ordered pair of values within a unit of size m
    // contributes 1/(m-1). For binary data only the off-diagonal mass
    // o_01 + o_10 = 2·z·o/(m-1) matters for disagreement.
    let mut disagreement = 0.0;
    let mut n0 = 0usize;
    let mut n1 = 0usize;
    for (zeros, ones) in units {
        let m = zeros + ones;
        if m < 2 {
            continue;
        }
        disagreement += 2.0 * (zeros * ones) as f64 / (m - 1) as f64;
        n0 += zeros;
        n1 += ones;
    }
    let n = n0 + n1;
    if n == 0 {
        return Err(Error::DegenerateData("no pairable values".into()));
    }
    let expected = 2.0 * n0 as f64 * n1 as f64;
    if expected == 0.0 {
        return Err(Error::DegenerateData("expected disagreement is zero (all values identical)".into()));
    }
    Ok(1.0 - (n - 1) as f64 * disagreement / expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[Option<u8>]]) -> AnnotationMatrix {
        let annotators = (0..rows.len()).map(|a| format!("a{a}")).collect();
        let instances = (0..rows[0].len()).map(|i| format!("i{i}")).collect();
        let mut m = AnnotationMatrix::new(annotators, instances).unwrap();
        for (a, row) in rows.iter().enumerate() {
            for (i, cell) in row.iter().enumerate() {
                if let Some(l) = cell {
                    m.set(&format!("a{a}"), &format!("i{i}"), *l).unwrap();
                }
            }
        }
        m
    }

    #[test]
    fn perfect_agreement() {
        let m = matrix(&[&[Some(0), Some(1), Some(0), Some(1)], &[Some(0), Some(1), Some(0), Some(1)]]);
        assert_eq!(krippendorff_alpha(&m).unwrap(), 1.0);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let m = matrix(&[&[Some(0), Some(0)], &[Some(0), Some(0)], &[Some(0), None]]);
        assert!(matches!(krippendorff_alpha(&m), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn nothing_pairable_is_degenerate() {
        let m = matrix(&[&[Some(0), None], &[None, Some(1)]]);
        assert!(matches!(krippendorff_alpha(&m), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn textbook_binary_example() {
        // Krippendorff's two-coder binary illustration: 10 units, coder A
        // 0 1 0 0 0 0 0 0 1 0, coder B 1 1 1 0 0 1 0 0 0 0, alpha = 0.095.
        let a = [0, 1, 0, 0, 0, 0, 0, 0, 1, 0].map(Some);
        let b = [1, 1, 1, 0, 0, 1, 0, 0, 0, 0].map(Some);
        let alpha = krippendorff_alpha(&matrix(&[&a, &b])).unwrap();
        assert!((alpha - 0.095).abs() < 5e-4, "{alpha}");
    }
}
