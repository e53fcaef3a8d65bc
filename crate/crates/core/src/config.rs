//! Flat `key = value` run configuration files.
//!
//! ```text
//! # comments and blank lines are ignored
//! target = area
//! layers = 3
//! ```

use std::path::Path;

use crate::trainer::TrainConfig;
use crate::{Error, Result};

fn parse_value<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

/// Sets one field by name.
pub fn set_field(config: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "target" => config.target = value.parse()?,
        "layers" | "L" => config.layers = parse_value(key, value)?,
        "alpha" => config.alpha = parse_value(key, value)?,
        "rho" => config.rho = parse_value(key, value)?,
        "gamma" => config.gamma = parse_value(key, value)?,
        "k" | "K" => config.k = parse_value(key, value)?,
        "n" => config.n = parse_value(key, value)?,
        "batch_size" => config.batch_size = parse_value(key, value)?,
        "epochs" => config.epochs = parse_value(key, value)?,
        "learning_rate" | "lr" => config.learning_rate = parse_value(key, value)?,
        "seed" => config.seed = parse_value(key, value)?,
        "variant" => config.variant = value.parse()?,
        "stop_gradient_p" => config.stop_gradient_p = parse_value(key, value)?,
        "validation_fraction" => config.validation_fraction = parse_value(key, value)?,
        "precision" => config.precision = value.parse()?,
        _ => return Err(Error::Config(format!("unknown key `{key}`"))),
    }
    Ok(())
}

/// Applies every assignment in `text` on top of `base`; the result is validated.
pub fn parse_config(text: &str, base: TrainConfig) -> Result<TrainConfig> {
    let mut config = base;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        set_field(&mut config, key.trim(), value.trim()).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    parse_config(&text, TrainConfig::default())
}

/// Renders every field so that `parse_config` reproduces `config`.
pub fn render_config(config: &TrainConfig) -> String {
    format!(
        "target = {}\nlayers = {}\nalpha = {}\nrho = {}\ngamma = {}\nk = {}\nn = {}\nbatch_size = {}\nepochs = {}\nlearning_rate = {}\nseed = {}\nvariant = {}\nstop_gradient_p = {}\nvalidation_fraction = {}\nprecision = {}\n",
        config.target,
        config.layers,
        config.alpha,
        config.rho,
        config.gamma,
        config.k,
        config.n,
        config.batch_size,
        config.epochs,
        config.learning_rate,
        config.seed,
        config.variant,
        config.stop_gradient_p,
        config.validation_fraction,
        config.precision
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Target;
    use crate::model::Variant;

    #[test]
    fn defaults_and_overrides() {
        let c = parse_config("# run\ntarget = area\nL = 3\nvariant = stl # trailing\n", TrainConfig::default()).unwrap();
        assert_eq!(c.target, Target::Area);
        assert_eq!(c.layers, 3);
        assert_eq!(c.variant, Variant::Stl);
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.rho, 0.5);
        assert_eq!(c.gamma, 1.0);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_config("alpha = 0.5\nbogus = 1\n", TrainConfig::default()).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(parse_config("alpha 0.5", TrainConfig::default()).is_err());
        assert!(parse_config("alpha = 1.5", TrainConfig::default()).is_err());
        assert!(parse_config("epochs = many", TrainConfig::default()).is_err());
    }

    #[test]
    fn render_round_trips() {
        let c = TrainConfig {
            alpha: 0.1,
            learning_rate: 3e-4,
            variant: Variant::Pgrl,
            stop_gradient_p: true,
            ..TrainConfig::default()
        };
        assert_eq!(parse_config(&render_config(&c), TrainConfig::default()).unwrap(), c);
    }
}
