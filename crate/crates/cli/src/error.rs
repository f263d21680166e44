use std::fmt;
use std::path::Path;

/// Process exit status by failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Input = 1,
    Solver = 2,
    Internal = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub msg: String,
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Input,
            msg: msg.into(),
        }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Internal,
            msg: msg.into(),
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::input(format!("{}: {e}", path.display()))
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<l0fa::Error> for CliError {
    fn from(e: l0fa::Error) -> Self {
        use l0fa::Error as E;
        let kind = match &e {
            E::SingularSum { .. }
            | E::SingularLagrangian { .. }
            | E::NonFiniteIterate { .. }
            | E::AllCellsFailed
            | E::ZeroEstimate
            | E::NonPositiveK(_)
            | E::DegenerateDraw { .. } => ExitKind::Solver,
            _ => ExitKind::Input,
        };
        Self {
            kind,
            msg: e.to_string(),
        }
    }
}
