use crate::route::{PipeRoute, Vec3};
use crate::sensor::{FieldModel, SensorConfig, DEFAULT_DISTANCE_FLOOR};

/// How far off the centerline a candidate source sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LateralOffset {
    /// On the pipe wall: half the local bore.
    HalfBore,
    Fixed(f64),
}

/// Forward model shared by the fitter and the grid oracle. Distances are
/// true 3D distances between the sensor on the centerline and the candidate
/// source on the wall, so bends are handled the same way as in simulation.
#[derive(Debug, Clone, Copy)]
pub struct ForwardModel<'a> {
    pub route: &'a PipeRoute,
    pub kind: FieldModel,
    pub offset: LateralOffset,
    pub baseline: f64,
    pub mu: f64,
    pub distance_floor: f64,
    /// Compare against the kernel averaged across each bin rather than its
    /// value at the bin center. Binned means of a sharp peak sit measurably
    /// below the center value once many samples are averaged.
    pub bin_averaged: bool,
}

/// Three-point Gauss-Legendre rule on [-1/2, 1/2]: (node, weight).
pub(crate) const BIN_QUADRATURE: [(f64, f64); 3] = [
    (-0.387_298_334_620_741_7, 5.0 / 18.0),
    (0.0, 8.0 / 18.0),
    (0.387_298_334_620_741_7, 5.0 / 18.0),
];

impl<'a> ForwardModel<'a> {
    pub fn new(route: &'a PipeRoute, kind: FieldModel) -> Self {
        Self {
            route,
            kind,
            offset: LateralOffset::HalfBore,
            baseline: 0.0,
            mu: 0.0,
            distance_floor: DEFAULT_DISTANCE_FLOOR,
            bin_averaged: false,
        }
    }

    /// Model matching a detector configuration (kernel, baseline, medium).
    pub fn for_sensor(route: &'a PipeRoute, sensor: &SensorConfig) -> Self {
        Self {
            route,
            kind: sensor.field_model(),
            offset: LateralOffset::HalfBore,
            baseline: sensor.baseline,
            mu: sensor.mu,
            distance_floor: sensor.distance_floor,
            bin_averaged: true,
        }
    }

    pub fn with_baseline(mut self, baseline: f64) -> Self {
        self.baseline = baseline;
        self
    }

    pub fn with_bin_averaging(mut self, on: bool) -> Self {
        self.bin_averaged = on;
        self
    }

    pub fn with_offset(mut self, offset: LateralOffset) -> Self {
        self.offset = offset;
        self
    }

    pub fn sensor_point(&self, s: f64) -> Vec3 {
        self.route.pose_extended(s).position
    }

    pub fn lateral_offset(&self, s: f64) -> f64 {
        match self.offset {
            LateralOffset::Fixed(d) => d,
            LateralOffset::HalfBore => {
                let clamped = s.clamp(0.0, self.route.total_length());
                self.route.bore_at(clamped).map_or(0.0, |b| b / 2.0)
            }
        }
    }

    pub fn source_point(&self, s: f64) -> Vec3 {
        self.route.pose_extended(s).offset(self.lateral_offset(s))
    }

    /// Field per unit strength between a sensor point and a source at `s`.
    pub fn kernel(&self, sensor: &Vec3, s: f64) -> f64 {
        self.kernel_from(sensor, &self.source_point(s))
    }

    pub fn kernel_from(&self, sensor: &Vec3, source: &Vec3) -> f64 {
        self.kind.kernel((sensor - source).norm(), self.mu, self.distance_floor)
    }

    /// Kernel when the sensor passes right by the source: the peak response
    /// per unit strength.
    pub fn peak_kernel(&self, s: f64) -> f64 {
        self.kernel(&self.sensor_point(s), s)
    }

    /// Sensor sample points and weights standing in for one bin.
    pub fn bin_points(&self, center: f64, bin_width: f64) -> Vec<(Vec3, f64)> {
        if self.bin_averaged {
            BIN_QUADRATURE
                .iter()
                .map(|&(u, wt)| (self.sensor_point(center + u * bin_width), wt))
                .collect()
        } else {
            vec![(self.sensor_point(center), 1.0)]
        }
    }

    /// Noise-free reading at each of `positions` for `(s, strength)` sources,
    /// at the sensor position itself.
    pub fn predict(&self, positions: &[f64], sources: &[(f64, f64)]) -> Vec<f64> {
        self.predict_binned(positions, 0.0, sources)
    }

    /// As [`predict`](Self::predict), but averaged over bins of `bin_width`
    /// when the model is bin-averaged.
    pub fn predict_binned(&self, positions: &[f64], bin_width: f64, sources: &[(f64, f64)]) -> Vec<f64> {
        let points: Vec<Vec3> = sources.iter().map(|&(s, _)| self.source_point(s)).collect();
        positions
            .iter()
            .map(|&p| {
                let sensors = self.bin_points(p, bin_width);
                self.baseline
                    + sources
                        .iter()
                        .zip(&points)
                        .map(|(&(_, a), w)| {
                            a * sensors.iter().map(|(sp, wt)| wt * self.kernel_from(sp, w)).sum::<f64>()
                        })
                        .sum::<f64>()
            })
            .collect()
    }
}
