use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact frame rate as a reduced fraction (e.g. 30000/1001 for NTSC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FrameRate {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl FrameRate {
    pub const NTSC: FrameRate = FrameRate { num: 30000, den: 1001 };

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::UnsupportedFrameRate(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(FrameRate {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(fps: u64) -> Self {
        FrameRate { num: fps, den: 1 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Rates retained by the corpus filter: 23 to 30 fps inclusive.
    pub fn check_supported(&self) -> Result<()> {
        if self.num < 23 * self.den || self.num > 30 * self.den {
            return Err(Error::UnsupportedFrameRate(self.to_string()));
        }
        Ok(())
    }

    /// Number of whole frame periods contained in `samples` at `sample_rate`.
    pub fn frames_in(&self, samples: usize, sample_rate: u32) -> usize {
        ((samples as u128 * self.num as u128) / (sample_rate as u128 * self.den as u128)) as usize
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for FrameRate {
    type Err = Error;

    /// Accepts `30`, `30000/1001` or a decimal such as `29.97` (read as 30000/1001,
    /// likewise `23.976`/`23.98` as 24000/1001).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::UnsupportedFrameRate(s.to_string());
        match s {
            "29.97" => return Ok(FrameRate::NTSC),
            "23.976" | "23.98" => return FrameRate::new(24000, 1001),
            _ => {}
        }
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return FrameRate::new(n, d);
        }
        if let Some((int, frac)) = s.split_once('.') {
            let digits = frac.len() as u32;
            let den = 10u64.checked_pow(digits).ok_or_else(bad)?;
            let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            let frac: u64 = frac.parse().map_err(|_| bad())?;
            return FrameRate::new(int * den + frac, den);
        }
        FrameRate::new(s.parse().map_err(|_| bad())?, 1)
    }
}

impl TryFrom<String> for FrameRate {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FrameRate> for String {
    fn from(r: FrameRate) -> String {
        r.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_rates() {
        assert_eq!("30".parse::<FrameRate>().unwrap(), FrameRate::integer(30));
        assert_eq!("29.97".parse::<FrameRate>().unwrap(), FrameRate::NTSC);
        assert_eq!("50/2".parse::<FrameRate>().unwrap(), FrameRate::integer(25));
        assert_eq!("24.5".parse::<FrameRate>().unwrap(), FrameRate::new(49, 2).unwrap());
        assert!("0".parse::<FrameRate>().is_err());
        assert!("abc".parse::<FrameRate>().is_err());
    }

    #[test]
    fn supported_range() {
        assert!(FrameRate::integer(23).check_supported().is_ok());
        assert!(FrameRate::integer(30).check_supported().is_ok());
        assert!(FrameRate::NTSC.check_supported().is_ok());
        assert!(FrameRate::integer(60).check_supported().is_err());
        assert!(FrameRate::integer(22).check_supported().is_err());
    }

    #[test]
    fn whole_frames() {
        assert_eq!(FrameRate::integer(25).frames_in(16000, 16000), 25);
        assert_eq!(FrameRate::NTSC.frames_in(16000 * 10, 16000), 299);
    }
}
