use std::str::FromStr;

use crate::error::{Error, Result};

/// How per-step action cross-entropies are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepReduction {
    Sum,
    Mean,
}

/// Which losses are trained and what the decoder is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// Activity one-hot fed to the decoder (gold in training, predicted at
    /// inference); both losses.
    Hierarchical,
    /// Both losses, decoder sees a zero one-hot.
    Flat,
    /// Action loss only, decoder sees a zero one-hot.
    ActionsOnly,
}

impl Conditioning {
    pub fn name(self) -> &'static str {
        match self {
            Conditioning::Hierarchical => "hierarchical",
            Conditioning::Flat => "flat",
            Conditioning::ActionsOnly => "actions_only",
        }
    }
}

impl FromStr for Conditioning {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchical" => Ok(Conditioning::Hierarchical),
            "flat" => Ok(Conditioning::Flat),
            "actions_only" => Ok(Conditioning::ActionsOnly),
            _ => Err(Error::Config(format!("unknown conditioning `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub node_dim: usize,
    pub edge_dim: usize,
    pub ecc_layers: usize,
    pub ecc_hidden: usize,
    pub head_hidden: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub activity_classes: usize,
    /// Atomic actions plus the end-of-sequence token.
    pub action_vocab: usize,
    pub max_decode_len: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub feed_previous_token: bool,
    pub step_reduction: StepReduction,
    pub conditioning: Conditioning,
}

impl ModelConfig {
    /// Full-size architecture.
    pub fn full_size(action_vocab: usize) -> Self {
        ModelConfig {
            node_dim: 512,
            edge_dim: 600,
            ecc_layers: 3,
            ecc_hidden: 128,
            head_hidden: 128,
            lstm_hidden: 384,
            lstm_layers: 2,
            activity_classes: 18,
            action_vocab,
            max_decode_len: 40,
            learning_rate: 1e-3,
            epochs: 300,
            batch_size: 1,
            feed_previous_token: true,
            step_reduction: StepReduction::Sum,
            conditioning: Conditioning::Hierarchical,
        }
    }

    /// Same structure at a width that trains in seconds on one core.
    pub fn small(action_vocab: usize) -> Self {
        ModelConfig {
            node_dim: 32,
            edge_dim: 16,
            ecc_hidden: 16,
            head_hidden: 32,
            lstm_hidden: 48,
            ..ModelConfig::full_size(action_vocab)
        }
    }

    pub fn readout_dim(&self) -> usize {
        self.ecc_layers * self.ecc_hidden
    }

    pub fn eos(&self) -> usize {
        self.action_vocab - 1
    }

    pub fn decoder_input_dim(&self) -> usize {
        self.readout_dim()
            + self.activity_classes
            + if self.feed_previous_token { self.action_vocab } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("node_dim", self.node_dim),
            ("edge_dim", self.edge_dim),
            ("ecc_layers", self.ecc_layers),
            ("ecc_hidden", self.ecc_hidden),
            ("head_hidden", self.head_hidden),
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_layers", self.lstm_layers),
            ("activity_classes", self.activity_classes),
            ("max_decode_len", self.max_decode_len),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.action_vocab < 2 {
            return Err(Error::Config("action_vocab needs at least one action plus EOS".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("bad learning rate {}", self.learning_rate)));
        }
        Ok(())
    }

    /// Key/value pairs stored alongside checkpoints.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let reduction = match self.step_reduction {
            StepReduction::Sum => "sum",
            StepReduction::Mean => "mean",
        };
        [
            ("node_dim", self.node_dim.to_string()),
            ("edge_dim", self.edge_dim.to_string()),
            ("ecc_layers", self.ecc_layers.to_string()),
            ("ecc_hidden", self.ecc_hidden.to_string()),
            ("head_hidden", self.head_hidden.to_string()),
            ("lstm_hidden", self.lstm_hidden.to_string()),
            ("lstm_layers", self.lstm_layers.to_string()),
            ("activity_classes", self.activity_classes.to_string()),
            ("action_vocab", self.action_vocab.to_string()),
            ("max_decode_len", self.max_decode_len.to_string()),
            ("learning_rate", format!("{:e}", self.learning_rate)),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("feed_previous_token", self.feed_previous_token.to_string()),
            ("step_reduction", reduction.to_string()),
            ("conditioning", self.conditioning.name().to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut c = ModelConfig::full_size(2);
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Sets one field from its text form. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{v}` for {key}")))
        }
        match key {
            "node_dim" => self.node_dim = num(key, value)?,
            "edge_dim" => self.edge_dim = num(key, value)?,
            "ecc_layers" => self.ecc_layers = num(key, value)?,
            "ecc_hidden" => self.ecc_hidden = num(key, value)?,
            "head_hidden" => self.head_hidden = num(key, value)?,
            "lstm_hidden" => self.lstm_hidden = num(key, value)?,
            "lstm_layers" => self.lstm_layers = num(key, value)?,
            "activity_classes" => self.activity_classes = num(key, value)?,
            "action_vocab" => self.action_vocab = num(key, value)?,
            "max_decode_len" => self.max_decode_len = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "feed_previous_token" => self.feed_previous_token = num(key, value)?,
            "step_reduction" => {
                self.step_reduction = match value.trim() {
                    "sum" => StepReduction::Sum,
                    "mean" => StepReduction::Mean,
                    other => return Err(Error::Config(format!("unknown step_reduction `{other}`"))),
                }
            }
            "conditioning" => self.conditioning = value.trim().parse()?,
            _ => return Err(Error::Config(format!("unknown model key `{key}`"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_dimensions() {
        let c = ModelConfig::full_size(179);
        assert_eq!(c.readout_dim(), 384);
        assert_eq!(c.edge_dim, 600);
        assert_eq!(c.eos(), 178);
        c.validate().unwrap();
    }

    #[test]
    fn pairs_round_trip() {
        let mut c = ModelConfig::small(57);
        c.feed_previous_token = false;
        c.step_reduction = StepReduction::Mean;
        c.conditioning = Conditioning::Flat;
        c.learning_rate = 3e-3;
        let pairs = c.to_pairs();
        let back = ModelConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut c = ModelConfig::small(10);
        assert!(matches!(c.set("dropout", "0.1"), Err(Error::Config(_))));
        assert!(matches!(c.set("epochs", "many"), Err(Error::Config(_))));
    }
}
