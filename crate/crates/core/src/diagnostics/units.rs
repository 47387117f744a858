//! Dimensional bookkeeping for the bound formulas.
//!
//! The ledger formulas are written once over [`Quantity`] and evaluated
//! either on plain numbers or on [`Dim`], which tracks powers of cm and sec
//! (in quarters) and flags any sum of unlike units or any exponential of a
//! dimensional argument.

use std::fmt;
use std::ops::{Add, Div, Mul};

/// Arithmetic needed by the bound formulas.
pub trait Quantity: Copy + Add<Output = Self> + Mul<Output = Self> + Div<Output = Self> {
    /// Dimensionless constant.
    fn scalar(v: f64) -> Self;
    /// `self^(quarters / 4)`.
    fn pow_quarters(self, quarters: i32) -> Self;
    /// `factor * exp(exponent)`, zero whenever `factor` is zero.
    fn scaled_exp(factor: Self, exponent: Self) -> Self;
}

impl Quantity for f64 {
    fn scalar(v: f64) -> Self {
        v
    }

    fn pow_quarters(self, quarters: i32) -> Self {
        match quarters {
            2 => self.sqrt(),
            -2 => 1.0 / self.sqrt(),
            _ => self.powf(quarters as f64 / 4.0),
        }
    }

    fn scaled_exp(factor: Self, exponent: Self) -> Self {
        if factor == 0.0 {
            0.0
        } else {
            factor * exponent.exp()
        }
    }
}

/// Units `cm^(cm/4) sec^(sec/4)`; `valid` turns false on inconsistent use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dim {
    pub cm: i32,
    pub sec: i32,
    pub valid: bool,
}

impl Dim {
    /// `cm^cm sec^sec` with integer exponents.
    pub const fn new(cm: i32, sec: i32) -> Self {
        Dim {
            cm: 4 * cm,
            sec: 4 * sec,
            valid: true,
        }
    }

    pub const NONE: Dim = Dim::new(0, 0);

    pub fn is_dimensionless(self) -> bool {
        self.valid && self.cm == 0 && self.sec == 0
    }

    /// True if valid and equal to `cm^cm sec^sec`.
    pub fn is(self, cm: i32, sec: i32) -> bool {
        self == Dim::new(cm, sec)
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.valid {
            return write!(f, "<inconsistent>");
        }
        let part = |name: &str, q: i32| match q {
            0 => String::new(),
            4 => format!(" {name}"),
            q if q % 4 == 0 => format!(" {name}^{}", q / 4),
            q => format!(" {name}^({q}/4)"),
        };
        let s = format!("{}{}", part("cm", self.cm), part("sec", self.sec));
        if s.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", s.trim_start())
        }
    }
}

impl Add for Dim {
    type Output = Dim;
    fn add(self, rhs: Dim) -> Dim {
        Dim {
            valid: self == rhs,
            ..self
        }
    }
}

impl Mul for Dim {
    type Output = Dim;
    fn mul(self, rhs: Dim) -> Dim {
        Dim {
            cm: self.cm + rhs.cm,
            sec: self.sec + rhs.sec,
            valid: self.valid && rhs.valid,
        }
    }
}

impl Div for Dim {
    type Output = Dim;
    fn div(self, rhs: Dim) -> Dim {
        Dim {
            cm: self.cm - rhs.cm,
            sec: self.sec - rhs.sec,
            valid: self.valid && rhs.valid,
        }
    }
}

impl Quantity for Dim {
    fn scalar(_: f64) -> Self {
        Dim::NONE
    }

    fn pow_quarters(self, quarters: i32) -> Self {
        let (cm, sec) = (self.cm * quarters, self.sec * quarters);
        Dim {
            cm: cm / 4,
            sec: sec / 4,
            valid: self.valid && cm % 4 == 0 && sec % 4 == 0,
        }
    }

    fn scaled_exp(factor: Self, exponent: Self) -> Self {
        Dim {
            valid: factor.valid && exponent.is_dimensionless(),
            ..factor
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let cm = Dim::new(1, 0);
        let s = Dim::new(0, 1);
        assert!((cm * cm / cm).is(1, 0));
        assert!(!(cm + s).valid);
        assert!((cm + cm).is(1, 0));
        assert!((cm * cm).pow_quarters(2).is(1, 0));
        assert_eq!(cm.pow_quarters(1).cm, 1);
        assert!(!Dim::scaled_exp(cm, s).valid);
        assert!(Dim::scaled_exp(cm, Dim::NONE).is(1, 0));
        assert_eq!(format!("{}", Dim::new(4, -2)), "cm^4 sec^-2");
        assert_eq!(format!("{}", Dim::NONE), "1");
    }

    #[test]
    fn scaled_exp_of_zero_factor() {
        assert_eq!(f64::scaled_exp(0.0, 1e6), 0.0);
        assert!(f64::scaled_exp(1.0, 1e6).is_infinite());
    }
}
