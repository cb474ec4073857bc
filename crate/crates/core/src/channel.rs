//! Uplink channel: COST-231 Hata large-scale path loss, real-valued Rayleigh
//! block fading and the noisy superposition at the server.
//!
//! Only the real part of the complex baseband model is simulated, so a
//! unit-power Rayleigh coefficient contributes `N(0, 1/2)` and the default
//! noise variance is `1/2`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Noise variance of the real part of unit-power complex AWGN.
pub const DEFAULT_NOISE_VARIANCE: f64 = 0.5;

/// Variance of the real part of a unit-variance circularly symmetric
/// complex Gaussian.
pub const FADING_VARIANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HataParams {
    pub carrier_mhz: f64,
    pub bs_height_m: f64,
    pub ms_height_m: f64,
}

impl Default for HataParams {
    fn default() -> Self {
        Self {
            carrier_mhz: 1800.0,
            bs_height_m: 30.0,
            ms_height_m: 1.5,
        }
    }
}

impl HataParams {
    pub const CARRIER_RANGE_MHZ: (f64, f64) = (1500.0, 2000.0);

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = Self::CARRIER_RANGE_MHZ;
        if !(lo..=hi).contains(&self.carrier_mhz) {
            return Err(Error::OutOfValidity(format!(
                "carrier {} MHz",
                self.carrier_mhz
            )));
        }
        if !(self.bs_height_m > 0.0 && self.bs_height_m.is_finite()) {
            return Err(Error::OutOfValidity(format!(
                "base-station height {} m",
                self.bs_height_m
            )));
        }
        if !(self.ms_height_m > 0.0 && self.ms_height_m.is_finite()) {
            return Err(Error::OutOfValidity(format!(
                "mobile height {} m",
                self.ms_height_m
            )));
        }
        Ok(())
    }
}

/// COST-231 Hata path loss in dB (medium-city correction, `C = 0 dB`).
pub fn path_loss_db(distance_km: f64, params: &HataParams) -> Result<f64> {
    params.validate()?;
    if !(distance_km > 0.0 && distance_km.is_finite()) {
        return Err(Error::OutOfValidity(format!("distance {distance_km} km")));
    }
    let log_f = params.carrier_mhz.log10();
    let log_hb = params.bs_height_m.log10();
    let mobile_correction = (1.1 * log_f - 0.7) * params.ms_height_m - (1.56 * log_f - 0.8);
    Ok(46.3 + 33.9 * log_f - 13.82 * log_hb - mobile_correction
        + (44.9 - 6.55 * log_hb) * distance_km.log10())
}

/// Amplitude gain `10^(-PL/20)` of the COST-231 Hata model.
pub fn path_loss_cost231(distance_km: f64, params: &HataParams) -> Result<f64> {
    Ok(10f64.powf(-path_loss_db(distance_km, params)? / 20.0))
}

/// Device placement within a circular cell around the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub distances_km: Vec<f64>,
    pub cell_radius_km: f64,
    pub hata: HataParams,
}

impl CellGeometry {
    pub fn new(distances_km: Vec<f64>, cell_radius_km: f64, hata: HataParams) -> Result<Self> {
        let geometry = Self {
            distances_km,
            cell_radius_km,
            hata,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// `devices` positions drawn uniformly over the disk (radius ∝ sqrt(u)).
    pub fn sample_uniform<R: Rng + ?Sized>(
        devices: usize,
        cell_radius_km: f64,
        hata: HataParams,
        rng: &mut R,
    ) -> Result<Self> {
        let distances_km = (0..devices)
            .map(|_| {
                // 1 - u lies in (0, 1], keeping every distance positive.
                let u: f64 = 1.0 - rng.random::<f64>();
                cell_radius_km * u.sqrt()
            })
            .collect();
        Self::new(distances_km, cell_radius_km, hata)
    }

    pub fn validate(&self) -> Result<()> {
        self.hata.validate()?;
        if !(self.cell_radius_km > 0.0 && self.cell_radius_km.is_finite()) {
            return Err(Error::OutOfValidity(format!(
                "cell radius {} km",
                self.cell_radius_km
            )));
        }
        for &d in &self.distances_km {
            if !(d > 0.0 && d <= self.cell_radius_km) {
                return Err(Error::OutOfValidity(format!("distance {d} km")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.distances_km.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances_km.is_empty()
    }

    /// Large-scale amplitudes of the devices in `subset` under `mode`.
    pub fn amplitudes(&self, subset: &[usize], mode: PathLossMode) -> Result<Vec<f64>> {
        match mode {
            PathLossMode::Unit => Ok(vec![1.0; subset.len()]),
            PathLossMode::Absolute | PathLossMode::Relative => {
                let mut gains = subset
                    .iter()
                    .map(|&k| {
                        let d = *self.distances_km.get(k).ok_or(Error::DeviceIndex {
                            index: k,
                            k: self.len(),
                        })?;
                        path_loss_cost231(d, &self.hata)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if mode == PathLossMode::Relative {
                    let max = gains.iter().copied().fold(0.0, f64::max);
                    if max > 0.0 {
                        gains.iter_mut().for_each(|g| *g /= max);
                    }
                }
                Ok(gains)
            }
        }
    }
}

/// How large-scale path loss enters the fading coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLossMode {
    /// Path loss ignored (amplitude 1 for every device).
    #[default]
    Unit,
    /// Path loss rescaled so the strongest device in a block has gain 1.
    Relative,
    /// Absolute COST-231 gains.
    Absolute,
}

/// Per-round real fading coefficients and the receiver noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub coefficients: Vec<f64>,
    pub noise_variance: f64,
}

impl ChannelState {
    pub fn new(coefficients: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive (got {noise_variance})"
            )));
        }
        if coefficients.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite fading coefficient".into(),
            ));
        }
        Ok(Self {
            coefficients,
            noise_variance,
        })
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.coefficients.iter().map(|h| h.abs()).collect()
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// `h_k = a_k * s_k` with `s_k ~ N(0, 1/2)` independent across devices.
pub fn sample_fading<R: Rng + ?Sized>(
    rng: &mut R,
    amplitudes: &[f64],
    noise_variance: f64,
) -> Result<ChannelState> {
    let small_scale = Normal::new(0.0, FADING_VARIANCE.sqrt()).expect("valid normal");
    let coefficients = amplitudes
        .iter()
        .map(|a| a * small_scale.sample(rng))
        .collect();
    ChannelState::new(coefficients, noise_variance)
}

/// One block-fading realization for every device in `geometry`.
pub fn sample_block_fading<R: Rng + ?Sized>(
    rng: &mut R,
    geometry: &CellGeometry,
    mode: PathLossMode,
    noise_variance: f64,
) -> Result<ChannelState> {
    let all: Vec<usize> = (0..geometry.len()).collect();
    sample_fading(rng, &geometry.amplitudes(&all, mode)?, noise_variance)
}

/// `y_m = sum_k h_k x_{k,m} + n_m`. Without a noise stream the superposition
/// is noiseless.
pub fn mac_receive<R: Rng + ?Sized>(
    blocks: &[Vec<f64>],
    channel: &ChannelState,
    noise: Option<&mut R>,
) -> Result<Vec<f64>> {
    if blocks.len() != channel.len() {
        return Err(Error::LengthMismatch {
            expected: channel.len(),
            found: blocks.len(),
        });
    }
    let m = blocks.first().map_or(0, Vec::len);
    if let Some(bad) = blocks.iter().find(|b| b.len() != m) {
        return Err(Error::LengthMismatch {
            expected: m,
            found: bad.len(),
        });
    }
    let mut y = vec![0.0; m];
    for (block, h) in blocks.iter().zip(&channel.coefficients) {
        for (acc, x) in y.iter_mut().zip(block) {
            *acc += h * x;
        }
    }
    if let Some(rng) = noise {
        let awgn = Normal::new(0.0, channel.noise_variance.sqrt()).expect("valid normal");
        for v in y.iter_mut() {
            *v += awgn.sample(rng);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, SimRng};

    fn noiseless(blocks: &[Vec<f64>], channel: &ChannelState) -> Vec<f64> {
        mac_receive::<SimRng>(blocks, channel, None).unwrap()
    }

    #[test]
    fn hata_at_one_kilometre() {
        // Independent evaluation of the published formula at f=1800 MHz,
        // h_b=30 m, h_m=1.5 m, d=1 km.
        let params = HataParams::default();
        let pl = path_loss_db(1.0, &params).unwrap();
        assert!((pl - 136.196_947_657_317_03).abs() < 1e-9, "{pl}");
        let gain = path_loss_cost231(1.0, &params).unwrap();
        assert!((gain - 1.549_360_990_304_058_6e-7).abs() < 1e-18);

        let pl_half = path_loss_db(0.5, &params).unwrap();
        assert!((pl_half - 125.593_209_474_121_76).abs() < 1e-9);
    }

    #[test]
    fn distance_term_vanishes_at_one_kilometre() {
        let mut params = HataParams::default();
        let base = path_loss_db(1.0, &params).unwrap();
        // Changing h_b alters the distance slope, which must not matter at d=1.
        params.bs_height_m = 50.0;
        let slope_free = path_loss_db(1.0, &params).unwrap();
        let expected = base - 13.82 * (50f64.log10() - 30f64.log10());
        assert!((slope_free - expected).abs() < 1e-9);
    }

    #[test]
    fn path_loss_validity() {
        let params = HataParams::default();
        assert!(path_loss_db(0.0, &params).is_err());
        assert!(path_loss_db(-1.0, &params).is_err());
        let mut bad = params;
        bad.carrier_mhz = 900.0;
        assert!(matches!(
            path_loss_db(1.0, &bad),
            Err(Error::OutOfValidity(_))
        ));
        bad.carrier_mhz = 2100.0;
        assert!(path_loss_db(1.0, &bad).is_err());
    }

    #[test]
    fn gain_strictly_decreasing_in_distance() {
        let params = HataParams::default();
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let g = path_loss_cost231(i as f64 * 0.01, &params).unwrap();
            assert!(g > 0.0 && g < prev);
            prev = g;
        }
    }

    #[test]
    fn uniform_disk_placement() {
        let mut rng = stream(3, "geometry", 0);
        let geo =
            CellGeometry::sample_uniform(20_000, 1.0, HataParams::default(), &mut rng).unwrap();
        assert!(geo.distances_km.iter().all(|&d| d > 0.0 && d <= 1.0));
        // Area-uniform: P(d <= 1/2) = 1/4.
        let inner = geo.distances_km.iter().filter(|&&d| d <= 0.5).count() as f64 / 20_000.0;
        assert!((inner - 0.25).abs() < 0.01, "{inner}");
    }

    #[test]
    fn path_loss_modes() {
        let geo = CellGeometry::new(vec![0.2, 0.5, 1.0], 1.0, HataParams::default()).unwrap();
        assert_eq!(
            geo.amplitudes(&[0, 2], PathLossMode::Unit).unwrap(),
            vec![1.0, 1.0]
        );
        let abs = geo.amplitudes(&[0, 1, 2], PathLossMode::Absolute).unwrap();
        assert!(abs[0] > abs[1] && abs[1] > abs[2]);
        let rel = geo.amplitudes(&[1, 2], PathLossMode::Relative).unwrap();
        assert_eq!(rel[0], 1.0);
        assert!((rel[1] - abs[2] / abs[1]).abs() < 1e-12);
        assert!(geo.amplitudes(&[5], PathLossMode::Absolute).is_err());
        assert!(CellGeometry::new(vec![1.5], 1.0, HataParams::default()).is_err());
    }

    #[test]
    fn fading_statistics() {
        let mut rng = stream(5, "fading", 0);
        let n = 1_000_000;
        let state = sample_fading(&mut rng, &vec![1.0; n], DEFAULT_NOISE_VARIANCE).unwrap();
        let var = state.coefficients.iter().map(|h| h * h).sum::<f64>() / n as f64;
        assert!((var - 0.5).abs() < 0.005, "{var}");
        let positive = state.coefficients.iter().filter(|&&h| h >= 0.0).count() as f64 / n as f64;
        assert!((positive - 0.5).abs() < 0.01, "{positive}");
    }

    #[test]
    fn fading_is_deterministic_per_stream() {
        let geo = CellGeometry::new(vec![0.3, 0.7], 1.0, HataParams::default()).unwrap();
        let a = sample_block_fading(
            &mut stream(1, "channel", 4),
            &geo,
            PathLossMode::Relative,
            0.5,
        )
        .unwrap();
        let b = sample_block_fading(
            &mut stream(1, "channel", 4),
            &geo,
            PathLossMode::Relative,
            0.5,
        )
        .unwrap();
        let c = sample_block_fading(
            &mut stream(1, "channel", 5),
            &geo,
            PathLossMode::Relative,
            0.5,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn superposition() {
        let ch = ChannelState::new(vec![0.5, 0.3], 0.5).unwrap();
        let y = noiseless(&[vec![1.0], vec![-1.0]], &ch);
        assert!((y[0] - 0.2).abs() < 1e-15);
        assert_eq!(noiseless(&[vec![0.0; 3], vec![0.0; 3]], &ch), vec![0.0; 3]);
    }

    #[test]
    fn superposition_is_linear_per_device() {
        let ch = ChannelState::new(vec![0.7, -1.3, 0.2], 0.5).unwrap();
        let x = vec![vec![1.0, -1.0], vec![-1.0, -1.0], vec![1.0, 1.0]];
        let base = noiseless(&x, &ch);
        let mut doubled = x.clone();
        doubled[1].iter_mut().for_each(|v| *v *= 2.0);
        let y2 = noiseless(&doubled, &ch);
        for m in 0..2 {
            assert!((y2[m] - base[m] - ch.coefficients[1] * x[1][m]).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_variance_matches() {
        let ch = ChannelState::new(vec![0.4, 0.9], 0.5).unwrap();
        let x = vec![vec![1.0; 1_000_000], vec![-1.0; 1_000_000]];
        let clean = noiseless(&x, &ch);
        let noisy = mac_receive(&x, &ch, Some(&mut stream(9, "noise", 0))).unwrap();
        let n = clean.len() as f64;
        let var = noisy
            .iter()
            .zip(&clean)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / n;
        assert!((var - 0.5).abs() < 0.01, "{var}");
    }

    #[test]
    fn reception_rejects_mismatched_shapes() {
        let ch = ChannelState::new(vec![0.5, 0.3], 0.5).unwrap();
        assert!(matches!(
            mac_receive::<SimRng>(&[vec![1.0]], &ch, None),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(mac_receive::<SimRng>(&[vec![1.0], vec![1.0, 1.0]], &ch, None).is_err());
        assert!(ChannelState::new(vec![1.0], 0.0).is_err());
    }
}
