use std::fmt;

/// A failed run and its process exit code: 1 validation gate, 2 usage,
/// config or I/O problem, 3 numerical failure.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn gate(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<rmtdp::Error> for Failure {
    fn from(err: rmtdp::Error) -> Self {
        let code = if err.is_numerical() { 3 } else { 2 };
        Self { code, message: err.to_string() }
    }
}
