use std::fmt;

use linkforge_core::Error;

/// Pipeline stage, used to pick the exit code of a failed run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Input,
    Candidates,
    Train,
    Score,
    Graph,
    Repair,
    Evaluate,
    Output,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 10,
            Stage::Input => 11,
            Stage::Candidates => 12,
            Stage::Train => 13,
            Stage::Score => 14,
            Stage::Graph => 15,
            Stage::Repair => 16,
            Stage::Evaluate => 17,
            Stage::Output => 18,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Input => "input",
            Stage::Candidates => "candidates",
            Stage::Train => "train",
            Stage::Score => "score",
            Stage::Graph => "graph",
            Stage::Repair => "repair",
            Stage::Evaluate => "evaluate",
            Stage::Output => "output",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage.name(), self.message)
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub fn fail<T>(stage: Stage, message: impl Into<String>) -> Outcome<T> {
    Err(Failure {
        stage,
        message: message.into(),
    })
}

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Outcome<T>;
}

impl<T> AtStage<T> for Result<T, Error> {
    fn at(self, stage: Stage) -> Outcome<T> {
        self.map_err(|e| Failure {
            stage,
            message: e.to_string(),
        })
    }
}
