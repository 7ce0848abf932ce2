use std::fmt::Display;

/// Process exit codes. The numbering is part of the command-line contract.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Code {
    Ok = 0,
    Violation = 1,
    OracleCap = 2,
    UnknownProtocol = 3,
    Budget = 4,
    Trace = 5,
    Usage = 64,
}

#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub message: String,
}

impl Failure {
    pub fn new(code: Code, message: impl Display) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }

    pub fn usage(message: impl Display) -> Self {
        Self::new(Code::Usage, message)
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::usage(format!("{}: {e}", path.display()))
    }
}

pub type CmdResult = Result<Code, Failure>;
