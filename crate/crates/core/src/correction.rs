//! Per-slice correction matrices: column-stochastic tables approximating
//! p(g_i = alpha | observed g̃_i = beta), one set for the source dataset and
//! one for the target dataset.

use serde::{Deserialize, Serialize};

/// Column for an observed value beta: `[p(g = -1 | beta), p(g = +1 | beta)]`.
pub type CorrectionColumn = [f64; 2];

/// Correction table for one slice. Columns are indexed by the observed slice
/// value; the abstain column is optional and defaults to the uninformative
/// (0.5, 0.5) when absent, since an abstain carries no information about the
/// latent value unless the user says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionMatrix {
    /// Column for observed -1.
    pub minus: CorrectionColumn,
    /// Column for observed 0 (abstain); optional.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero: Option<CorrectionColumn>,
    /// Column for observed +1.
    pub plus: CorrectionColumn,
}

impl CorrectionMatrix {
    /// The noiseless table: the observed value is the latent value.
    pub fn identity() -> Self {
        Self {
            minus: [1.0, 0.0],
            zero: None,
            plus: [0.0, 1.0],
        }
    }

    /// The uninformative table: the observed value says nothing.
    pub fn uniform() -> Self {
        Self {
            minus: [0.5, 0.5],
            zero: None,
            plus: [0.5, 0.5],
        }
    }

    /// Column for an observed value, with the (0.5, 0.5) abstain default.
    pub fn column(&self, beta: i8) -> CorrectionColumn {
        match beta {
            -1 => self.minus,
            0 => self.zero.unwrap_or([0.5, 0.5]),
            1 => self.plus,
            other => panic!("observed slice value must be in {{-1, 0, +1}}, got {other}"),
        }
    }

    /// p(g = alpha | observed beta) with alpha in {-1, +1}.
    pub fn prob(&self, alpha: i8, beta: i8) -> f64 {
        let col = self.column(beta);
        match alpha {
            -1 => col[0],
            1 => col[1],
            other => panic!("latent slice value must be in {{-1, +1}}, got {other}"),
        }
    }

    /// E[g | observed beta] = p(+1 | beta) - p(-1 | beta).
    pub fn conditional_mean(&self, beta: i8) -> f64 {
        let col = self.column(beta);
        col[1] - col[0]
    }

    /// Column-stochasticity violations (entries outside [0, 1] or a column sum
    /// away from 1 by more than `tol`), described per column.
    pub fn column_violations(&self, tol: f64) -> Vec<(i8, String)> {
        let mut out = Vec::new();
        let cols: [(i8, Option<CorrectionColumn>); 3] = [
            (-1, Some(self.minus)),
            (0, self.zero),
            (1, Some(self.plus)),
        ];
        for (beta, col) in cols {
            let Some(col) = col else { continue };
            if col.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
                out.push((beta, format!("entries {col:?} outside [0, 1]")));
                continue;
            }
            let sum = col[0] + col[1];
            if (sum - 1.0).abs() > tol {
                out.push((beta, format!("sums to {sum} != 1")));
            }
        }
        out
    }
}

/// Correction tables for every slice, source side and target side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionBundle {
    pub source: Vec<CorrectionMatrix>,
    pub target: Vec<CorrectionMatrix>,
}

impl CorrectionBundle {
    /// Noiseless tables for k slices on both sides.
    pub fn identity(k: usize) -> Self {
        Self {
            source: vec![CorrectionMatrix::identity(); k],
            target: vec![CorrectionMatrix::identity(); k],
        }
    }

    /// Replaces both sides with identity tables, keeping the slice count.
    /// This is the noise-unaware mode: observed slices are trusted verbatim.
    pub fn to_identity(&self) -> Self {
        Self::identity(self.source.len().max(self.target.len()))
    }

    pub fn k(&self) -> usize {
        self.source.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_a_point_mass() {
        let m = CorrectionMatrix::identity();
        assert_eq!(m.prob(1, 1), 1.0);
        assert_eq!(m.prob(-1, 1), 0.0);
        assert_eq!(m.conditional_mean(1), 1.0);
        assert_eq!(m.conditional_mean(-1), -1.0);
        assert_eq!(m.column(0), [0.5, 0.5]);
    }

    #[test]
    fn stochasticity_check_flags_bad_columns() {
        let m = CorrectionMatrix {
            minus: [0.4, 0.5],
            zero: None,
            plus: [0.0, 1.0],
        };
        let bad = m.column_violations(1e-9);
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].0, -1);
    }

    #[test]
    fn json_round_trip_matches_wire_format() {
        let bundle = CorrectionBundle {
            source: vec![CorrectionMatrix {
                minus: [0.9, 0.1],
                zero: Some([0.5, 0.5]),
                plus: [0.2, 0.8],
            }],
            target: vec![CorrectionMatrix::identity()],
        };
        let json = serde_json::to_string(&bundle).unwrap();
        assert!(json.contains("\"minus\":[0.9,0.1]"));
        assert!(json.contains("\"zero\":[0.5,0.5]"));
        let back: CorrectionBundle = serde_json::from_str(&json).unwrap();
        assert_eq!(back, bundle);
        // The abstain column may be omitted entirely.
        let terse: CorrectionBundle = serde_json::from_str(
            r#"{"source":[{"minus":[1.0,0.0],"plus":[0.0,1.0]}],"target":[{"minus":[1.0,0.0],"plus":[0.0,1.0]}]}"#,
        )
        .unwrap();
        assert_eq!(terse.source[0].zero, None);
    }

    #[test]
    fn identity_bundle_has_one_table_per_slice() {
        let b = CorrectionBundle::identity(3);
        assert_eq!(b.k(), 3);
        assert_eq!(b.to_identity(), b);
    }
}
