//! Daily weather series driving the LNAS model.
//!
//! CSV schema: header `day,temp_c,rad_mj`, one row per day, days numbered
//! consecutively from 1.

use std::io::Read;
use std::path::Path;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherDay {
    /// Mean daily temperature, °C.
    pub temp_c: f64,
    /// Daily radiation, MJ·m⁻².
    pub rad_mj: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Weather {
    days: Vec<WeatherDay>,
}

impl Weather {
    pub fn new(days: Vec<WeatherDay>) -> Self {
        Self { days }
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Weather of day `n` (1-based).
    pub fn day(&self, n: usize) -> WeatherDay {
        self.days[n - 1]
    }

    pub fn days(&self) -> &[WeatherDay] {
        &self.days
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(format!("cannot open weather file {}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
        let expected = ["day", "temp_c", "rad_mj"];
        if header.len() != 3 || header.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header `day,temp_c,rad_mj`, got `{}`",
                    header.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut days = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let field = |i: usize, name: &str| -> Result<f64> {
                record[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { line, message: format!("invalid {name} `{}`", &record[i]) })
            };
            let day = record[0]
                .parse::<usize>()
                .map_err(|_| Error::Parse { line, message: format!("invalid day `{}`", &record[0]) })?;
            if day != days.len() + 1 {
                return Err(Error::Parse { line, message: format!("expected day {}, found {day}", days.len() + 1) });
            }
            let temp_c = field(1, "temp_c")?;
            let rad_mj = field(2, "rad_mj")?;
            if !temp_c.is_finite() || !rad_mj.is_finite() || rad_mj < 0.0 {
                return Err(Error::Parse {
                    line,
                    message: "temperature must be finite and radiation non-negative".into(),
                });
            }
            days.push(WeatherDay { temp_c, rad_mj });
        }
        Ok(Self { days })
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["day", "temp_c", "rad_mj"]).map_err(io)?;
        for (i, d) in self.days.iter().enumerate() {
            w.write_record([(i + 1).to_string(), format!("{:.16e}", d.temp_c), format!("{:.16e}", d.rad_mj)])
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Deterministic seasonal weather: `T = 12 + 8 sin(2πn/365) + ε`,
/// `φ = 15 + 10 sin(2πn/365) + ε'` with `ε ~ N(0, 2²)`, `ε' ~ N(0, 3²)`.
///
/// Temperatures are clamped to `[-5, 35]` °C and radiation to `≥ 0`.
pub fn synthetic_weather(horizon: usize, seed: u64) -> Weather {
    let key = StreamKey::new(seed);
    let temp_noise = Normal::new(0.0, 2.0).unwrap();
    let rad_noise = Normal::new(0.0, 3.0).unwrap();
    let days = (1..=horizon)
        .map(|n| {
            let mut rng = key.stream(Purpose::Weather, n as u64, 0);
            let season = (2.0 * std::f64::consts::PI * n as f64 / 365.0).sin();
            let temp_c = (12.0 + 8.0 * season + temp_noise.sample(&mut rng)).clamp(-5.0, 35.0);
            let rad_mj = (15.0 + 10.0 * season + rad_noise.sample(&mut rng)).max(0.0);
            WeatherDay { temp_c, rad_mj }
        })
        .collect();
    Weather { days }
}
