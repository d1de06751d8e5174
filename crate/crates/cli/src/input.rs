//! Group and shift inputs: files on disk or the built-in fixtures.

use std::path::Path;

use serde_json::Value;
use sha2::{Digest, Sha256};

use schottky_thermo::fixtures;
use schottky_thermo::hyperbolic::Model;
use schottky_thermo::schottky::GroupFile;
use schottky_thermo::shift::ToyShiftFile;
use schottky_thermo::transfer::Discretization;
use schottky_thermo::{MarkovShift, OperatorSpec, SchottkyGroup};

use crate::config::{hex, Fixture, Params};
use crate::CliError;

#[derive(Debug, Clone)]
pub enum InputFile {
    Group(GroupFile),
    Toy(ToyShiftFile),
}

/// A validated input with its symbolic coding.
#[derive(Debug, Clone)]
pub struct Input {
    pub name: String,
    pub file: InputFile,
    pub group: Option<SchottkyGroup>,
    pub shift: MarkovShift,
    pub fingerprint: String,
}

impl InputFile {
    pub fn fixture(f: Fixture) -> Self {
        match f {
            Fixture::ToyTwoShift => InputFile::Toy(fixtures::toy_two_shift_file()),
            Fixture::FuchsianPair => InputFile::Group(fixtures::fuchsian_pair_file(vec![vec![1, 0]])),
            Fixture::FuchsianPairD0 => {
                let mut g = fixtures::fuchsian_pair_file(vec![]);
                g.name = Some(f.name().into());
                InputFile::Group(g)
            }
            Fixture::FuchsianTriple => InputFile::Group(fixtures::fuchsian_triple_file()),
            Fixture::KleinianPairD0 => InputFile::Group(fixtures::kleinian_pair_file(0)),
            Fixture::KleinianPairD1 => InputFile::Group(fixtures::kleinian_pair_file(1)),
        }
    }

    /// A JSON object with `generators` is a group file, anything else a tabulated shift.
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let parsed = if value.get("generators").is_some() {
            serde_json::from_value(value).map(InputFile::Group)
        } else {
            serde_json::from_value(value).map(InputFile::Toy)
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Vec<u8> {
        match self {
            InputFile::Group(g) => crate::report::to_json(g),
            InputFile::Toy(t) => crate::report::to_json(t),
        }
    }

    fn name(&self) -> Option<&str> {
        match self {
            InputFile::Group(g) => g.name.as_deref(),
            InputFile::Toy(t) => t.name.as_deref(),
        }
    }

    pub fn load(self, fallback_name: &str) -> Result<Input, CliError> {
        let name = self.name().unwrap_or(fallback_name).to_string();
        let fingerprint = hex(&Sha256::digest(self.to_json()));
        let (group, shift) = match &self {
            InputFile::Group(gf) => {
                let g: SchottkyGroup = gf.build().map_err(|e| CliError::Config(format!("{name}: {e}")))?;
                let shift = MarkovShift::from_schottky(&g).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
                (Some(g), shift)
            }
            InputFile::Toy(tf) => {
                let shift = tf.build().map_err(|e| CliError::Config(format!("{name}: {e}")))?;
                (None, shift)
            }
        };
        Ok(Input { name, file: self, group, shift, fingerprint })
    }
}

impl Input {
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        match (&p.group, p.fixture) {
            (Some(path), None) => {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input").to_string();
                InputFile::read(path)?.load(&stem)
            }
            (None, Some(f)) => Input::fixture(f),
            (Some(_), Some(_)) => Err(CliError::Config("give either a group file or a fixture, not both".into())),
            (None, None) => Err(CliError::Config("no input: pass --group FILE or --fixture NAME".into())),
        }
    }

    pub fn fixture(f: Fixture) -> Result<Self, CliError> {
        InputFile::fixture(f).load(f.name())
    }

    pub fn require_group(&self, command: &str) -> Result<&SchottkyGroup, CliError> {
        self.group
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("`{command}` needs a Schottky group, not a tabulated shift")))
    }

    pub fn model(&self) -> Option<Model> {
        self.group.as_ref().map(|g| g.model())
    }

    pub fn discretization(&self, nodes_per_disk: usize) -> Discretization {
        match self.group {
            Some(_) => Discretization::Collocation { nodes_per_disk },
            None => Discretization::ExactMatrix,
        }
    }

    /// The transfer operator; space groups have none.
    pub fn operator(&self, nodes_per_disk: usize) -> Result<OperatorSpec, CliError> {
        if self.model() == Some(Model::UpperHalfSpace3D) {
            return Err(CliError::Computation(format!(
                "{}: transfer operators are implemented for plane groups and tabulated shifts only",
                self.name
            )));
        }
        OperatorSpec::new(self.shift.clone(), self.discretization(nodes_per_disk))
            .map_err(|e| CliError::Config(format!("{}: {e}", self.name)))
    }
}
