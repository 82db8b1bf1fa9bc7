/// Produces user `u`'s `k`-th scalar contribution (both 1-based).
pub trait ScalarSource: Sync {
    fn value(&self, user: u32, round: u32) -> f64;
}

impl<F: Fn(u32, u32) -> f64 + Sync> ScalarSource for F {
    fn value(&self, user: u32, round: u32) -> f64 {
        self(user, round)
    }
}

/// Produces user `u`'s `k`-th category in `[1, L]`.
pub trait CategorySource: Sync {
    fn category(&self, user: u32, round: u32) -> u32;
}

impl<F: Fn(u32, u32) -> u32 + Sync> CategorySource for F {
    fn category(&self, user: u32, round: u32) -> u32 {
        self(user, round)
    }
}

/// Scalar contributions clipped to `[-sensitivity/2, sensitivity/2]`, so that
/// replacing one contribution moves the sum by at most `sensitivity`.
pub struct ScalarStream<'a> {
    source: &'a dyn ScalarSource,
    half: f64,
}

impl<'a> ScalarStream<'a> {
    pub fn new(source: &'a dyn ScalarSource, sensitivity: f64) -> crate::Result<Self> {
        if !(sensitivity > 0.0) {
            return Err(crate::error::invalid(format!(
                "sensitivity must be positive, got {sensitivity}"
            )));
        }
        Ok(Self {
            source,
            half: sensitivity / 2.0,
        })
    }

    pub fn get(&self, user: u32, round: u32) -> f64 {
        self.source.value(user, round).clamp(-self.half, self.half)
    }
}

/// Category contributions checked against the domain `[1, L]`.
pub struct CategoryStream<'a> {
    source: &'a dyn CategorySource,
    domain: u32,
}

impl<'a> CategoryStream<'a> {
    pub fn new(source: &'a dyn CategorySource, domain: u32) -> crate::Result<Self> {
        if domain < 2 {
            return Err(crate::error::invalid(format!(
                "domain size must be >= 2, got {domain}"
            )));
        }
        Ok(Self { source, domain })
    }

    pub fn domain(&self) -> u32 {
        self.domain
    }

    pub fn get(&self, user: u32, round: u32) -> crate::Result<u32> {
        let x = self.source.category(user, round);
        if x == 0 || x > self.domain {
            return Err(crate::error::invalid(format!(
                "user {user} produced category {x} outside [1, {}]",
                self.domain
            )));
        }
        Ok(x)
    }
}
