use super::{
    candidate_coordinates, check_alpha, count_minima, maxk_sum, maxk_sum_by_parity,
    CandidateCoordinates, ExtremaCounts, SeparableComponent,
};
use crate::error::Result;

/// Default over-request factor for the unsigned heap search.
pub const DEFAULT_ALPHA: f64 = 3.0;

const LOG_FLOOR: f64 = 1e-300;
const MAX_RETRIES: usize = 3;

/// Local minima of a separable product in ascending value order.
#[derive(Debug, Clone)]
pub struct RankedMinima {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Positions into each dimension's candidate coordinates.
    pub indices: Vec<Vec<usize>>,
    pub n_negative: usize,
    pub counts: ExtremaCounts,
    /// True when the buffered heap search came up short and the exact
    /// parity-aware selection was used instead.
    pub used_fallback: bool,
}

impl RankedMinima {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The `n_o` smallest local minima of `prod_i f_i(x_i)`.
///
/// Negative minima come from the all-mixed grid, ranked by largest `|f|`;
/// positive minima from the all-mono grid, ranked by smallest `|f|`. When a
/// class has more minima than needed, `ceil(alpha * need)` unsigned
/// combinations are drawn and filtered by sign, doubling `alpha` up to three
/// times before switching to the exact parity-aware selection.
pub fn minsort(components: &[SeparableComponent], n_o: usize, alpha: f64) -> Result<RankedMinima> {
    check_alpha(n_o, alpha)?;
    let coords = components
        .iter()
        .map(candidate_coordinates)
        .collect::<Result<Vec<_>>>()?;
    minsort_coords(&coords, n_o, alpha)
}

/// [`minsort`] on precomputed candidate coordinates.
pub fn minsort_coords(coords: &[CandidateCoordinates], n_o: usize, alpha: f64) -> Result<RankedMinima> {
    check_alpha(n_o, alpha)?;
    let counts = count_minima(coords);

    let need_neg = (n_o as u128).min(counts.negative_minima) as usize;
    let (neg, fb_neg) = select(coords, false, need_neg, counts.negative_minima, alpha);
    let need_pos = ((n_o - neg.len()) as u128).min(counts.positive_minima) as usize;
    let (pos, fb_pos) = select(coords, true, need_pos, counts.positive_minima, alpha);

    let n_negative = neg.len();
    let mut ranked: Vec<(f64, Vec<usize>)> = neg
        .into_iter()
        .chain(pos)
        .map(|idx| {
            let v = idx
                .iter()
                .enumerate()
                .map(|(i, &j)| coords[i].values[j])
                .product();
            (v, idx)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut out = RankedMinima {
        points: Vec::with_capacity(ranked.len()),
        values: Vec::with_capacity(ranked.len()),
        indices: Vec::with_capacity(ranked.len()),
        n_negative,
        counts,
        used_fallback: fb_neg || fb_pos,
    };
    for (v, idx) in ranked {
        out.points
            .push(idx.iter().enumerate().map(|(i, &j)| coords[i].coords[j]).collect());
        out.values.push(v);
        out.indices.push(idx);
    }
    Ok(out)
}

/// Picks `need` minima from the mono (`mono = true`, positive products) or
/// mixed (negative products) grid. Returns coordinate positions per point.
fn select(
    coords: &[CandidateCoordinates],
    mono: bool,
    need: usize,
    available: u128,
    alpha: f64,
) -> (Vec<Vec<usize>>, bool) {
    if need == 0 {
        return (Vec::new(), false);
    }
    let positions: Vec<Vec<usize>> = coords.iter().map(|c| c.positions(mono)).collect();
    // Larger row sums are better: big |f| on the negative side, small |f|
    // on the positive side.
    let dir = if mono { -1.0 } else { 1.0 };
    let rows: Vec<Vec<f64>> = coords
        .iter()
        .zip(&positions)
        .map(|(c, pos)| {
            pos.iter()
                .map(|&j| dir * c.values[j].abs().max(LOG_FLOOR).ln())
                .collect()
        })
        .collect();
    let negative: Vec<Vec<bool>> = coords
        .iter()
        .zip(&positions)
        .map(|(c, pos)| pos.iter().map(|&j| !c.positive[j]).collect())
        .collect();
    let want_odd = !mono;
    let parity_of = |idx: &[usize]| idx.iter().enumerate().filter(|(i, &j)| negative[*i][j]).count() % 2 == 1;
    let to_coords = |idx: Vec<usize>| -> Vec<usize> {
        idx.into_iter().enumerate().map(|(i, j)| positions[i][j]).collect()
    };

    if available <= need as u128 {
        let [even, odd] = maxk_sum_by_parity(&rows, &negative, need);
        let picked = if want_odd { odd } else { even };
        return (picked.into_iter().map(|c| to_coords(c.indices)).collect(), false);
    }

    let grid: u128 = rows.iter().fold(1u128, |acc, r| acc.saturating_mul(r.len() as u128));
    let mut a = alpha;
    for _ in 0..=MAX_RETRIES {
        let k = ((a * need as f64).ceil() as u128).min(grid) as usize;
        let hits: Vec<Vec<usize>> = maxk_sum(&rows, k)
            .into_iter()
            .filter(|c| parity_of(&c.indices) == want_odd)
            .take(need)
            .map(|c| c.indices)
            .collect();
        if hits.len() == need {
            return (hits.into_iter().map(to_coords).collect(), false);
        }
        if k as u128 == grid {
            break;
        }
        a *= 2.0;
    }
    let [even, odd] = maxk_sum_by_parity(&rows, &negative, need);
    let picked = if want_odd { odd } else { even };
    (picked.into_iter().map(|c| to_coords(c.indices)).collect(), true)
}
