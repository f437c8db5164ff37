use std::fmt;

use crate::{Error, Modality, Result};

/// Which encoder layer(s) feed each unimodal encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// The last layer of the stack.
    FinalOutput,
    /// One 1-based layer index per modality (visual, acoustic, linguistic).
    SingleLayer([usize; 3]),
    /// Softmax-weighted sum over all layers with trainable logits.
    WeightedSum,
}

impl Aggregation {
    /// Parses `final`, `weighted`, `single:k` or `single:kv,ka,kl`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "final" | "final_output" => return Ok(Aggregation::FinalOutput),
            "weighted" | "weighted_sum" => return Ok(Aggregation::WeightedSum),
            _ => {}
        }
        let rest = s
            .strip_prefix("single:")
            .ok_or_else(|| Error::Config(format!("unknown aggregation `{s}`")))?;
        let ks = rest
            .split(',')
            .map(|k| {
                k.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad layer index `{k}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        match ks.as_slice() {
            [k] => Ok(Aggregation::SingleLayer([*k; 3])),
            [v, a, l] => Ok(Aggregation::SingleLayer([*v, *a, *l])),
            _ => Err(Error::Config(format!(
                "`{s}`: expected one layer index or three (visual,acoustic,linguistic)"
            ))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregation::FinalOutput => f.write_str("final"),
            Aggregation::WeightedSum => f.write_str("weighted"),
            Aggregation::SingleLayer([v, a, l]) if v == a && a == l => write!(f, "single:{v}"),
            Aggregation::SingleLayer([v, a, l]) => write!(f, "single:{v},{a},{l}"),
        }
    }
}

/// Non-empty subset of the three modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModalitySet([bool; 3]);

impl ModalitySet {
    pub const ALL: ModalitySet = ModalitySet([true; 3]);

    pub fn only(m: Modality) -> Self {
        let mut s = [false; 3];
        s[m.index()] = true;
        ModalitySet(s)
    }

    pub fn from_flags(flags: [bool; 3]) -> Result<Self> {
        if !flags.iter().any(|&b| b) {
            return Err(Error::Config("at least one modality is required".into()));
        }
        Ok(ModalitySet(flags))
    }

    /// Comma-separated names or letters, e.g. `v,a,l` or `acoustic`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut flags = [false; 3];
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            flags[Modality::parse(part)?.index()] = true;
        }
        Self::from_flags(flags)
    }

    pub fn contains(&self, m: Modality) -> bool {
        self.0[m.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = Modality> + '_ {
        Modality::ALL.into_iter().filter(|m| self.contains(*m))
    }

    pub fn bits(&self) -> u8 {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | ((b as u8) << i))
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits & !0b111 != 0 {
            return Err(Error::Config(format!("bad modality mask {bits:#b}")));
        }
        Self::from_flags([bits & 1 != 0, bits & 2 != 0, bits & 4 != 0])
    }
}

impl fmt::Display for ModalitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.iter().map(|m| m.short().to_string()).collect();
        f.write_str(&s.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Utterance-level embedding size shared by all modalities.
    pub embed_dim: usize,
    pub enc_hidden: usize,
    pub heads: usize,
    pub dec_hidden: usize,
    pub dropout: f64,
    pub modalities: ModalitySet,
    pub aggregation: Aggregation,
    /// Feature width per modality (visual, acoustic, linguistic).
    pub input_dims: [usize; 3],
    /// Encoder layer count per modality.
    pub num_layers: [usize; 3],
}

impl ModelConfig {
    /// Larger-corpus sizes: 256-unit encoder FC, 4 heads, 128-d embedding,
    /// 128-unit decoder FC.
    pub fn large(input_dims: [usize; 3], num_layers: [usize; 3]) -> Self {
        ModelConfig {
            embed_dim: 128,
            enc_hidden: 256,
            heads: 4,
            dec_hidden: 128,
            dropout: 0.2,
            modalities: ModalitySet::ALL,
            aggregation: Aggregation::FinalOutput,
            input_dims,
            num_layers,
        }
    }

    /// Half-width variant for small corpora.
    pub fn small(input_dims: [usize; 3], num_layers: [usize; 3]) -> Self {
        ModelConfig {
            embed_dim: 64,
            enc_hidden: 128,
            dec_hidden: 64,
            ..Self::large(input_dims, num_layers)
        }
    }

    /// Width of the tanh layer inside attention pooling.
    pub fn attn_dim(&self) -> usize {
        (self.enc_hidden / 2).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embed_dim", self.embed_dim),
            ("enc_hidden", self.enc_hidden),
            ("heads", self.heads),
            ("dec_hidden", self.dec_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        for m in Modality::ALL {
            if self.input_dims[m.index()] == 0 || self.num_layers[m.index()] == 0 {
                return Err(Error::Config(format!("{m}: input dim and layer count must be positive")));
            }
        }
        if let Aggregation::SingleLayer(ks) = self.aggregation {
            for m in self.modalities.iter() {
                let (k, l) = (ks[m.index()], self.num_layers[m.index()]);
                if k < 1 || k > l {
                    return Err(Error::Config(format!("{m}: layer {k} outside 1..={l}")));
                }
            }
        }
        Ok(())
    }

    /// Closed-form count of trainable scalars.
    pub fn param_count(&self) -> usize {
        let (h, f, a, r) = (self.enc_hidden, self.embed_dim, self.attn_dim(), self.heads);
        let encoders: usize = self
            .input_dims
            .iter()
            .map(|&d| d * h + h + 2 * h + h * a + a + a * r + r * h * f + f)
            .sum();
        let g = self.dec_hidden;
        let decoder = 3 * f * 3 + 3 + f * g + g + 2 * g + g + 1;
        let logits = match self.aggregation {
            Aggregation::WeightedSum => self.num_layers.iter().sum(),
            _ => 0,
        };
        encoders + decoder + logits
    }
}
