//! Simulated inference latency for the predictor services. Sampling is
//! deterministic: request i draws from stream i of a counter-mode RNG seeded
//! with the service seed, so a run can be reproduced exactly.

use rand::SeedableRng;
use rand_distr::Distribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatencyModel {
    None,
    /// Constant delay, seconds.
    Fixed(f64),
    /// exp(mu + sigma * Z), seconds.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
}

impl LatencyModel {
    /// Parses `none`, `fixed:<seconds>` or `lognormal:<mu>,<sigma>`.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("none") {
            return Ok(LatencyModel::None);
        }
        if let Some(v) = spec.strip_prefix("fixed:") {
            let d: f64 = v
                .parse()
                .map_err(|_| format!("invalid fixed delay {v:?}"))?;
            if d < 0.0 {
                return Err("fixed delay must be >= 0".into());
            }
            return Ok(LatencyModel::Fixed(d));
        }
        if let Some(v) = spec.strip_prefix("lognormal:") {
            let (mu, sigma) = v
                .split_once(',')
                .ok_or_else(|| format!("expected lognormal:<mu>,<sigma>, got {spec:?}"))?;
            let mu: f64 = mu
                .trim()
                .parse()
                .map_err(|_| format!("invalid mu {mu:?}"))?;
            let sigma: f64 = sigma
                .trim()
                .parse()
                .map_err(|_| format!("invalid sigma {sigma:?}"))?;
            if sigma <= 0.0 {
                return Err("sigma must be > 0".into());
            }
            return Ok(LatencyModel::LogNormal { mu, sigma });
        }
        Err(format!("unknown latency model {spec:?}"))
    }

    /// The delay for request `index`, in seconds.
    pub fn sample(&self, seed: u64, index: u64) -> f64 {
        match *self {
            LatencyModel::None => 0.0,
            LatencyModel::Fixed(d) => d,
            LatencyModel::LogNormal { mu, sigma } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(index);
                let dist =
                    rand_distr::LogNormal::new(mu, sigma).expect("sigma validated at parse time");
                dist.sample(&mut rng)
            }
        }
    }
}
