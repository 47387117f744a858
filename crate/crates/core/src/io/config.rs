//! Flat `key = value` run configuration.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fields::PhysParams;
use crate::integrate::{Monitors, StepControl};
use crate::picard::PicardConfig;

/// Initial condition named by the `preset` key.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    /// `u = 0`, `sigma = rho0 I`, `rho = rho0`.
    Equilibrium,
    /// Decaying vortex array, no stress or density.
    TaylorGreen,
    /// Seeded band-limited data with positive-definite stress.
    RandomAdmissible,
    /// State read from a binary snapshot.
    Snapshot(PathBuf),
}

impl Preset {
    fn parse(s: &str) -> Option<Preset> {
        match s {
            "equilibrium" => Some(Preset::Equilibrium),
            "taylor_green" => Some(Preset::TaylorGreen),
            "random_admissible" => Some(Preset::RandomAdmissible),
            _ => s
                .strip_prefix("snapshot:")
                .filter(|p| !p.is_empty())
                .map(|p| Preset::Snapshot(PathBuf::from(p))),
        }
    }
}

/// Parameters of the initial condition.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialSpec {
    pub preset: Preset,
    /// Mean density (and the isotropic stress level of `equilibrium`).
    pub rho0: f64,
    /// Peak speed of the initial velocity.
    pub amplitude: f64,
    /// Peak of the anisotropic stress components `a`, `b`.
    pub stress_amplitude: f64,
    /// Largest wavenumber index of random fields.
    pub modes: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub length: f64,
    pub params: PhysParams,
    pub initial: InitialSpec,
    pub control: StepControl,
    pub monitors: Monitors,
    pub out_dir: PathBuf,
    /// Value of every generic constant in the a priori bounds.
    pub constant_c: f64,
    pub picard_nodes: usize,
    pub picard_max_iter: usize,
    pub picard_tol: f64,
}

impl RunConfig {
    pub fn picard(&self, t0: f64) -> Result<PicardConfig> {
        PicardConfig::new(t0, self.picard_nodes, self.picard_max_iter, self.picard_tol)
    }

    pub fn grid(&self) -> Result<crate::spectral::Grid> {
        crate::spectral::make_grid(self.n, self.length)
    }
}

const KEYS: &[&str] = &[
    "n",
    "L",
    "nu",
    "kappa",
    "k",
    "bigK",
    "preset",
    "rho0",
    "amplitude",
    "stress_amplitude",
    "modes",
    "seed",
    "cfl",
    "dt_min",
    "dt_max",
    "t_end",
    "output_every",
    "snapshot_times",
    "out_dir",
    "positivity_tol",
    "c_ceiling",
    "energy_tol",
    "constant_c",
    "picard_nodes",
    "picard_max_iter",
    "picard_tol",
];

struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| Error::Config {
                line,
                msg: format!("cannot parse `{v}` as a value for `{key}`"),
            }),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => parse_real(v).ok_or_else(|| Error::Config {
                line,
                msg: format!("cannot parse `{v}` as a number for `{key}`"),
            }),
        }
    }
}

/// Plain numbers, optionally followed by `pi` (`2pi`, `0.5pi`, `pi`).
fn parse_real(v: &str) -> Option<f64> {
    let v = v.trim();
    if let Some(head) = v.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let factor = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
        return Some(factor * std::f64::consts::PI);
    }
    v.parse().ok()
}

fn tokenize(text: &str) -> Result<Entries> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            msg: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::Config {
                line,
                msg: format!("unknown key `{key}`"),
            });
        }
        if let Some((first, _)) = map.get(key) {
            return Err(Error::Config {
                line,
                msg: format!("duplicate key `{key}` (first set on line {first})"),
            });
        }
        map.insert(key.to_string(), (line, value.to_string()));
    }
    Ok(Entries { map })
}

/// Parses a configuration, applying defaults for missing keys.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let e = tokenize(text)?;
    let n = e.get("n", 64usize)?;
    let length = e.real("L", 2.0 * std::f64::consts::PI)?;
    crate::spectral::make_grid(n, length)?;

    let nu = e.real("nu", 0.01)?;
    let kappa = e.real("kappa", 0.01)?;
    if !(kappa > 0.0) {
        return Err(Error::ConfigValue(format!(
            "kappa must be positive (stress diffusivity), got {kappa}"
        )));
    }
    let params = PhysParams::new(nu, kappa, e.real("k", 1.0)?, e.real("bigK", 1.0)?)?;

    let preset_text = e.raw("preset").map_or("equilibrium", |(_, v)| v);
    let preset = Preset::parse(preset_text).ok_or_else(|| Error::Config {
        line: e.raw("preset").map_or(0, |(l, _)| l),
        msg: format!(
            "unknown preset `{preset_text}`; expected equilibrium, taylor_green, \
             random_admissible or snapshot:<path>"
        ),
    })?;
    let initial = InitialSpec {
        preset,
        rho0: e.real("rho0", 1.0)?,
        amplitude: e.real("amplitude", 0.5)?,
        stress_amplitude: e.real("stress_amplitude", 0.3)?,
        modes: e.get("modes", 4usize)?,
        seed: e.get("seed", 42u64)?,
    };
    if !(initial.rho0 >= 0.0 && initial.rho0.is_finite()) {
        return Err(Error::ConfigValue(format!("rho0 must be nonnegative, got {}", initial.rho0)));
    }
    if !(initial.amplitude >= 0.0 && initial.stress_amplitude >= 0.0) {
        return Err(Error::ConfigValue("amplitudes must be nonnegative".into()));
    }
    if initial.modes == 0 {
        return Err(Error::ConfigValue("modes must be at least 1".into()));
    }

    let mut control = StepControl::new(
        e.real("cfl", 0.5)?,
        e.real("dt_min", 1e-6)?,
        e.real("dt_max", 0.01)?,
        e.real("t_end", 1.0)?,
        e.get("output_every", 10usize)?,
    )?;
    if let Some((line, v)) = e.raw("snapshot_times") {
        control.snapshot_times = v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                parse_real(s).ok_or_else(|| Error::Config {
                    line,
                    msg: format!("cannot parse snapshot time `{s}`"),
                })
            })
            .collect::<Result<_>>()?;
        control.validate()?;
    }

    let defaults = Monitors::default();
    let energy_tol = e.real("energy_tol", defaults.energy_tol.unwrap_or(1e-6))?;
    let monitors = Monitors {
        positivity_tol: e.real("positivity_tol", defaults.positivity_tol)?,
        c_ceiling: e.real("c_ceiling", defaults.c_ceiling)?,
        energy_tol: (energy_tol > 0.0).then_some(energy_tol),
    };
    if !(monitors.positivity_tol >= 0.0) || !(monitors.c_ceiling > 0.0) {
        return Err(Error::ConfigValue(
            "positivity_tol must be nonnegative and c_ceiling positive".into(),
        ));
    }

    let constant_c = e.real("constant_c", 1.0)?;
    if !(constant_c > 0.0 && constant_c.is_finite()) {
        return Err(Error::ConfigValue(format!("constant_c must be positive, got {constant_c}")));
    }
    let cfg = RunConfig {
        n,
        length,
        params,
        initial,
        control,
        monitors,
        out_dir: PathBuf::from(e.raw("out_dir").map_or("out", |(_, v)| v)),
        constant_c,
        picard_nodes: e.get("picard_nodes", 41usize)?,
        picard_max_iter: e.get("picard_max_iter", 60usize)?,
        picard_tol: e.real("picard_tol", 1e-10)?,
    };
    PicardConfig::new(0.1, cfg.picard_nodes, cfg.picard_max_iter, cfg.picard_tol)?;
    Ok(cfg)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "n=64\nL=6.283185307\nnu=0.01\nkappa=0.01\nk=1\nbigK=1\npreset=equilibrium\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.n, 64);
        assert_eq!(c.initial.preset, Preset::Equilibrium);
        assert_eq!(c.control.cfl, 0.5);
        assert_eq!(c.control.dt_max, 0.01);
        assert_eq!(c.control.output_every, 10);
        assert_eq!(c.monitors, Monitors::default());
        assert_eq!(c.constant_c, 1.0);
    }

    #[test]
    fn comments_blank_lines_and_pi() {
        let c = parse_config("# header\n\n n = 32 # grid\nL = 2pi\npreset = snapshot:/tmp/x.bin\n")
            .unwrap();
        assert_eq!(c.n, 32);
        assert!((c.length - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(c.initial.preset, Preset::Snapshot("/tmp/x.bin".into()));
    }

    #[test]
    fn rejects_bad_input() {
        let neg = parse_config("kappa=-1\n").unwrap_err();
        assert!(neg.to_string().contains("kappa"), "{neg}");
        assert!(matches!(
            parse_config("n=32\nn=64\n"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(matches!(parse_config("colour=blue\n"), Err(Error::Config { .. })));
        assert!(matches!(parse_config("n=abc\n"), Err(Error::Config { .. })));
        assert!(matches!(parse_config("just text\n"), Err(Error::Config { .. })));
        assert!(parse_config("preset=vortex\n").is_err());
        assert!(parse_config("n=31\n").is_err());
        assert!(parse_config("nu=0\n").is_err());
        assert!(parse_config("cfl=2\n").is_err());
        assert!(parse_config("picard_nodes=2\n").is_err());
    }

    #[test]
    fn snapshot_times_list() {
        let c = parse_config("snapshot_times = 0.5, 1.0\n").unwrap();
        assert_eq!(c.control.snapshot_times, vec![0.5, 1.0]);
        assert!(parse_config("snapshot_times = 0.5, x\n").is_err());
    }
}
