//! Channel patching and the masked-channel-modeling corruption scheme.
//!
//! A channel splits into real and imaginary planes, each flattened row-major
//! over (antenna, subcarrier) and chunked into P/2 patches of length
//! L = 2MN/P; real patches come first. Masking selects a share of the real
//! patches, splits them 80/10/10 into zeroed / replaced-with-Gaussian /
//! kept buckets, and applies the same selection and actions to the imaginary
//! counterparts (index + P/2).

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::channel::ChannelMatrix;
use crate::error::{CoreError, Result};

/// Patch layout plus the patch vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSequence {
    pub num_antennas: usize,
    pub num_subcarriers: usize,
    /// Patch count P (even); the first P/2 patches are the real plane.
    pub num_patches: usize,
    /// Patch length L = 2MN/P.
    pub patch_len: usize,
    pub patches: Vec<Vec<f64>>,
}

/// What happened to a masked patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskAction {
    Zero,
    Random,
    Keep,
}

/// Which real-patch indices were selected and how each was corrupted.
/// Imaginary counterparts (index + P/2) share the selection and action.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPlan {
    pub percent: f64,
    pub entries: Vec<(usize, MaskAction)>,
}

impl MaskPlan {
    /// All masked patch indices including imaginary counterparts.
    pub fn all_indices(&self, num_patches: usize) -> Vec<(usize, MaskAction)> {
        let half = num_patches / 2;
        let mut out = Vec::with_capacity(self.entries.len() * 2);
        for &(i, a) in &self.entries {
            out.push((i, a));
            out.push((i + half, a));
        }
        out
    }
}

/// Bucket shares for mask corruption; defaults to the 80/10/10 scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskProportions {
    pub zero: f64,
    pub random: f64,
    pub keep: f64,
}

impl Default for MaskProportions {
    fn default() -> Self {
        Self {
            zero: 0.8,
            random: 0.1,
            keep: 0.1,
        }
    }
}

/// Split a channel into P patches of length 2MN/P.
pub fn to_patches(h: &ChannelMatrix, num_patches: usize) -> Result<PatchSequence> {
    let (m, n) = (h.num_antennas(), h.num_subcarriers());
    let total = 2 * m * n;
    if num_patches == 0 || num_patches % 2 != 0 || total % num_patches != 0 {
        return Err(CoreError::Config(format!(
            "patch count {num_patches} must be even and divide 2*{m}*{n} = {total}"
        )));
    }
    let patch_len = total / num_patches;
    let half = num_patches / 2;
    let mut patches = Vec::with_capacity(num_patches);
    for plane in 0..2 {
        let comp = |c: &Complex64| if plane == 0 { c.re } else { c.im };
        for p in 0..half {
            patches.push(
                h.entries()[p * patch_len..(p + 1) * patch_len]
                    .iter()
                    .map(comp)
                    .collect(),
            );
        }
    }
    Ok(PatchSequence {
        num_antennas: m,
        num_subcarriers: n,
        num_patches,
        patch_len,
        patches,
    })
}

/// Rebuild the channel from its patches; exact inverse of [`to_patches`].
pub fn from_patches(seq: &PatchSequence) -> Result<ChannelMatrix> {
    let (m, n) = (seq.num_antennas, seq.num_subcarriers);
    let half = seq.num_patches / 2;
    if seq.patches.len() != seq.num_patches || seq.patch_len * half != m * n {
        return Err(CoreError::Shape(format!(
            "inconsistent patch sequence: {} patches of length {} for a {}x{} channel",
            seq.patches.len(),
            seq.patch_len,
            m,
            n
        )));
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); m * n];
    for p in 0..half {
        let re = &seq.patches[p];
        let im = &seq.patches[p + half];
        if re.len() != seq.patch_len || im.len() != seq.patch_len {
            return Err(CoreError::Shape("patch length mismatch".into()));
        }
        for i in 0..seq.patch_len {
            entries[p * seq.patch_len + i] = Complex64::new(re[i], im[i]);
        }
    }
    ChannelMatrix::new(m, n, entries)
}

/// Largest-remainder apportionment of `total` into the three buckets.
fn apportion(total: usize, prop: &MaskProportions) -> [usize; 3] {
    let weights = [prop.zero, prop.random, prop.keep];
    let quotas: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: [usize; 3] = [
        quotas[0].floor() as usize,
        quotas[1].floor() as usize,
        quotas[2].floor() as usize,
    ];
    let assigned: usize = counts.iter().sum();
    // Distribute the remainder by descending fractional part; ties go to the
    // earlier bucket (zero, then random, then keep).
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).expect("finite fractions").then(a.cmp(&b))
    });
    for i in 0..total - assigned {
        counts[order[i % 3]] += 1;
    }
    counts
}

/// Mask `p_percent` of the real patches (rounded up) with the configured
/// bucket proportions, mirroring selection and action onto the imaginary
/// counterparts. Returns the corrupted sequence and the plan.
pub fn apply_mask_with(
    seq: &PatchSequence,
    p_percent: f64,
    prop: MaskProportions,
    rng: &mut ChaCha12Rng,
) -> Result<(PatchSequence, MaskPlan)> {
    if !(0.0..=100.0).contains(&p_percent) {
        return Err(CoreError::Config(format!(
            "mask percentage {p_percent} outside [0, 100]"
        )));
    }
    let half = seq.num_patches / 2;
    let n_select = ((p_percent * half as f64) / 100.0).ceil() as usize;
    let mut indices: Vec<usize> = (0..half).collect();
    indices.shuffle(rng);
    indices.truncate(n_select);
    indices.sort_unstable();

    let counts = apportion(n_select, &prop);
    // Assign actions over a second shuffle so the bucket split is not
    // correlated with patch position.
    let mut assign = indices.clone();
    assign.shuffle(rng);
    let mut entries: Vec<(usize, MaskAction)> = Vec::with_capacity(n_select);
    for (rank, idx) in assign.into_iter().enumerate() {
        let action = if rank < counts[0] {
            MaskAction::Zero
        } else if rank < counts[0] + counts[1] {
            MaskAction::Random
        } else {
            MaskAction::Keep
        };
        entries.push((idx, action));
    }
    entries.sort_unstable_by_key(|(i, _)| *i);

    let mut out = seq.clone();
    for &(idx, action) in &entries {
        for patch_idx in [idx, idx + half] {
            match action {
                MaskAction::Zero => {
                    out.patches[patch_idx] = vec![0.0; seq.patch_len];
                }
                MaskAction::Random => {
                    out.patches[patch_idx] = (0..seq.patch_len)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect();
                }
                MaskAction::Keep => {}
            }
        }
    }
    Ok((
        out,
        MaskPlan {
            percent: p_percent,
            entries,
        },
    ))
}

/// [`apply_mask_with`] using the standard 80/10/10 proportions.
pub fn apply_mask(
    seq: &PatchSequence,
    p_percent: f64,
    rng: &mut ChaCha12Rng,
) -> Result<(PatchSequence, MaskPlan)> {
    apply_mask_with(seq, p_percent, MaskProportions::default(), rng)
}
