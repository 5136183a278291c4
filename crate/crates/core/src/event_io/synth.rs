use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Event, EventStream, SensorGeometry};
use crate::error::{Error, Result};

/// Contour drawn by the synthetic generator. Angles are in degrees,
/// measured from the +x axis towards +y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Straight segment of length `size`, centred on the shape position.
    Bar { angle_deg: f64 },
    /// Circle of diameter `size`.
    Disc,
    /// Two perpendicular arms of length `size / 2` meeting at the shape
    /// position; the first arm points along `angle_deg`.
    Corner { angle_deg: f64 },
}

impl Shape {
    pub fn kind_index(&self) -> u32 {
        match self {
            Shape::Bar { .. } => 0,
            Shape::Disc => 1,
            Shape::Corner { .. } => 2,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Shape::Bar { .. } => "bar",
            Shape::Disc => "disc",
            Shape::Corner { .. } => "corner",
        }
    }

    /// Offset of the contour point at parameter `u ∈ [0, 1)` from the
    /// shape position.
    fn contour_point(&self, size: f64, u: f64) -> (f64, f64) {
        match *self {
            Shape::Bar { angle_deg } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                let along = (u - 0.5) * size;
                (along * c, along * s)
            }
            Shape::Disc => {
                let (s, c) = (u * std::f64::consts::TAU).sin_cos();
                (0.5 * size * c, 0.5 * size * s)
            }
            Shape::Corner { angle_deg } => {
                let arm = if u < 0.5 { angle_deg } else { angle_deg + 90.0 };
                let along = (u * 2.0).fract() * 0.5 * size;
                let (s, c) = arm.to_radians().sin_cos();
                (along * c, along * s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub geometry: SensorGeometry,
    pub shape: Shape,
    pub size: f64,
    /// Shape position at t = 0, in pixels.
    pub start: (f64, f64),
    /// Pixels per millisecond.
    pub motion: (f64, f64),
    pub duration_ms: f64,
    /// Contour events per millisecond.
    pub event_rate: f64,
    /// Uniform background events per millisecond.
    pub noise_rate: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.size,
            self.start.0,
            self.start.1,
            self.motion.0,
            self.motion.1,
            self.duration_ms,
            self.event_rate,
            self.noise_rate,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("synthetic spec has a non-finite field".into()));
        }
        if self.event_rate < 0.0 || self.noise_rate < 0.0 || self.size < 0.0 {
            return Err(Error::InvalidInput("synthetic rates and size must be ≥ 0".into()));
        }
        if self.duration_ms <= 0.0 || self.duration_ms * 1000.0 > u32::MAX as f64 {
            return Err(Error::InvalidInput(format!(
                "synthetic duration {} ms out of range",
                self.duration_ms
            )));
        }
        if self.geometry.width == 0 || self.geometry.height == 0 {
            return Err(Error::InvalidInput("sensor geometry has a zero dimension".into()));
        }
        Ok(())
    }
}

/// Renders a moving contour plus uniform background noise as a Poisson
/// event process. The output is a pure function of `spec`; contour points
/// falling off the sensor are dropped.
pub fn synthesize(spec: &SynthSpec) -> Result<EventStream> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total_rate = spec.event_rate + spec.noise_rate;
    let geometry = spec.geometry;
    let mut events = Vec::new();
    if total_rate > 0.0 {
        let noise_share = spec.noise_rate / total_rate;
        let mut t = 0.0f64;
        loop {
            let u: f64 = rng.gen();
            t += -(1.0 - u).ln() / total_rate;
            if t >= spec.duration_ms {
                break;
            }
            let polarity = rng.gen_range(0..2u8);
            let (x, y) = if rng.gen::<f64>() < noise_share {
                (
                    rng.gen_range(0..geometry.width) as f64,
                    rng.gen_range(0..geometry.height) as f64,
                )
            } else {
                let (dx, dy) = spec.shape.contour_point(spec.size, rng.gen());
                (
                    (spec.start.0 + spec.motion.0 * t + dx).round(),
                    (spec.start.1 + spec.motion.1 * t + dy).round(),
                )
            };
            if x < 0.0 || y < 0.0 || x >= geometry.width as f64 || y >= geometry.height as f64 {
                continue;
            }
            events.push(Event::new((t * 1000.0) as u32, x as u16, y as u16, polarity));
        }
    }
    Ok(EventStream::new(geometry, events).with_label(spec.shape.kind_index()))
}
