// Copyright 2026 The bqcsim Developers
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except
// in compliance with the License. You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under
// the License.

//! Small statistics helpers shared by the verifier and the reports.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Binomial standard error `sqrt(p(1-p)/n)` of an observed rate.
pub fn binomial_stderr(successes: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = successes as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Result of a chi-square homogeneity test over a contingency table.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
}

/// Test whether the rows of `table` (groups x buckets counts) are draws from
/// a common bucket distribution. Empty bucket columns are dropped.
pub fn chi_square_homogeneity(table: &[Vec<u64>]) -> ChiSquareTest {
    let groups = table.len();
    let buckets = table.first().map_or(0, Vec::len);
    let mut col_totals = vec![0u64; buckets];
    let mut row_totals = vec![0u64; groups];
    for (g, row) in table.iter().enumerate() {
        for (b, &count) in row.iter().enumerate() {
            col_totals[b] += count;
            row_totals[g] += count;
        }
    }
    let total: u64 = row_totals.iter().sum();
    let live_cols = col_totals.iter().filter(|&&c| c > 0).count();
    let live_rows = row_totals.iter().filter(|&&r| r > 0).count();
    if total == 0 || live_cols < 2 || live_rows < 2 {
        return ChiSquareTest { statistic: 0.0, degrees_of_freedom: 0, p_value: 1.0 };
    }

    let mut statistic = 0.0;
    for (g, row) in table.iter().enumerate() {
        if row_totals[g] == 0 {
            continue;
        }
        for (b, &count) in row.iter().enumerate() {
            if col_totals[b] == 0 {
                continue;
            }
            let expected = row_totals[g] as f64 * col_totals[b] as f64 / total as f64;
            let diff = count as f64 - expected;
            statistic += diff * diff / expected;
        }
    }
    let dof = ((live_rows - 1) * (live_cols - 1)) as u64;
    let dist = ChiSquared::new(dof as f64).expect("dof >= 1");
    ChiSquareTest { statistic, degrees_of_freedom: dof, p_value: dist.sf(statistic) }
}
