use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::networks::conv::{Activation, ConvLayer, ConvSpec};

/// Channel width of the hidden layers; the published architecture uses 128.
pub const DEFAULT_WIDTH: usize = 128;

/// The seven parameter sets of the framework.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Description generator (FEN + GNA + GNB).
    Omega,
    /// Side reconstruction A.
    Alpha1,
    /// Side reconstruction B.
    Alpha2,
    /// Central reconstruction.
    Alpha3,
    /// Virtual side reconstruction A.
    Theta1,
    /// Virtual side reconstruction B.
    Theta2,
    /// Virtual central reconstruction.
    Theta3,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Omega,
        Role::Alpha1,
        Role::Alpha2,
        Role::Alpha3,
        Role::Theta1,
        Role::Theta2,
        Role::Theta3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Role::Omega => "omega",
            Role::Alpha1 => "alpha1",
            Role::Alpha2 => "alpha2",
            Role::Alpha3 => "alpha3",
            Role::Theta1 => "theta1",
            Role::Theta2 => "theta2",
            Role::Theta3 => "theta3",
        }
    }

    pub fn index(self) -> usize {
        Role::ALL.iter().position(|&r| r == self).expect("listed")
    }

    /// Number of input channels of the network's first layer.
    pub fn input_channels(self) -> usize {
        match self {
            Role::Alpha3 | Role::Theta3 => 2,
            _ => 1,
        }
    }

    pub fn specs(self, width: usize) -> Vec<ConvSpec> {
        match self {
            Role::Omega => generator_specs(width),
            r => reconstruction_specs(width, r.input_channels()),
        }
    }

    /// Layer names as printed in the architecture tables.
    pub fn layer_names(self) -> Vec<String> {
        match self {
            Role::Omega => {
                let mut names: Vec<String> = (1..=4).map(|i| format!("conv-{i}f")).collect();
                for branch in ["A", "B"] {
                    names.extend((5..=8).map(|i| format!("conv-{i}{branch}")));
                }
                names
            }
            r => {
                let tag = match r {
                    Role::Alpha1 | Role::Theta1 => 'a',
                    Role::Alpha2 | Role::Theta2 => 'b',
                    _ => 'c',
                };
                let mut names: Vec<String> = (1..=7).map(|i| format!("conv-{i}{tag}")).collect();
                names.push(format!("deconv-8{tag}"));
                names
            }
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown role `{s}`")))
    }
}

/// Layers 0..4 form the shared feature extractor, 4..8 branch A, 8..12 branch B.
pub fn generator_specs(width: usize) -> Vec<ConvSpec> {
    let relu = Activation::Relu;
    let mut specs = vec![
        ConvSpec::conv(9, 1, 1, width, relu),
        ConvSpec::conv(3, 2, width, width, relu),
        ConvSpec::conv(3, 1, width, width, relu),
        ConvSpec::conv(3, 1, width, width, relu),
    ];
    for _ in 0..2 {
        specs.extend([
            ConvSpec::conv(3, 1, width, width, relu),
            ConvSpec::conv(3, 1, width, width, relu),
            ConvSpec::conv(3, 1, width, width, relu),
            ConvSpec::conv(9, 1, width, 1, Activation::None),
        ]);
    }
    specs
}

/// Seven convolutions followed by a stride-2 deconvolution to full resolution.
pub fn reconstruction_specs(width: usize, c_in: usize) -> Vec<ConvSpec> {
    let relu = Activation::Relu;
    let mut specs = vec![ConvSpec::conv(9, 1, c_in, width, relu)];
    specs.extend((0..6).map(|_| ConvSpec::conv(3, 1, width, width, relu)));
    specs.push(ConvSpec::deconv(9, 2, width, 1, Activation::None));
    specs
}

pub(crate) const FEN: std::ops::Range<usize> = 0..4;
pub(crate) const BRANCH_A: std::ops::Range<usize> = 4..8;
pub(crate) const BRANCH_B: std::ops::Range<usize> = 8..12;

/// One network's weights together with its layer specification.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub role: Role,
    pub width: usize,
    pub specs: Vec<ConvSpec>,
    pub layers: Vec<ConvLayer>,
}

impl NetworkParams {
    pub fn zeros(role: Role, width: usize) -> Self {
        let specs = role.specs(width);
        let layers = specs.iter().map(ConvLayer::zeros).collect();
        NetworkParams {
            role,
            width,
            specs,
            layers,
        }
    }

    /// Gradient buffer with the same layout.
    pub fn zeros_like(&self) -> Vec<ConvLayer> {
        self.specs.iter().map(ConvLayer::zeros).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.role.specs(self.width);
        if self.specs != expected {
            return Err(Error::Shape(format!(
                "{} layer specs do not match the architecture",
                self.role
            )));
        }
        if self.layers.len() != self.specs.len() {
            return Err(Error::Shape(format!("{} has {} layers", self.role, self.layers.len())));
        }
        for (s, l) in self.specs.iter().zip(&self.layers) {
            if l.weight.len() != s.weight_len() || l.bias.len() != s.c_out {
                return Err(Error::Shape(format!("{} tensor sizes disagree with specs", self.role)));
            }
            if l.values().any(|v| !v.is_finite()) {
                return Err(Error::Range(format!("{} holds non-finite parameters", self.role)));
            }
        }
        Ok(())
    }

    pub(crate) fn expect_role(&self, allowed: &[Role]) -> Result<()> {
        if allowed.contains(&self.role) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "parameter set `{}` cannot be used here (expected one of {allowed:?})",
                self.role
            )))
        }
    }
}
