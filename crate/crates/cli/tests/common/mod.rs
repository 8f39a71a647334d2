#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const BIN: &str = env!("CARGO_BIN_EXE_ballotledger");

/// A `ballotledger serve` child process.
pub struct Server {
    pub child: Child,
    pub url: String,
}

impl Server {
    /// Starts a toy-group service with its data under `dir`.
    pub fn spawn(dir: &Path, extra: &str) -> Server {
        let config = dir.join("service.toml");
        std::fs::write(
            &config,
            format!(
                "listen_address = \"127.0.0.1:0\"\ngroup = \"toy\"\ndata_dir = \"data\"\n{extra}"
            ),
        )
        .unwrap();
        let mut child = Command::new(BIN)
            .args(["serve", "--config"])
            .arg(&config)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let url = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected serve output {line:?}"))
            .to_string();
        Server { child, url }
    }

    /// SIGKILL: no flush, no graceful shutdown.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }

    /// SIGTERM and wait for a clean exit.
    pub fn terminate(mut self) {
        let status = Command::new("kill")
            .arg("-TERM")
            .arg(self.child.id().to_string())
            .status()
            .unwrap();
        assert!(status.success());
        assert!(self.child.wait().unwrap().success());
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Runs the CLI against `url` with its keystore in `home`.
pub struct Cli {
    pub url: String,
    pub keystore: PathBuf,
    pub passphrase: Option<String>,
}

impl Cli {
    pub fn new(url: &str, home: &Path) -> Cli {
        Cli {
            url: url.to_string(),
            keystore: home.join("keys.bin"),
            passphrase: None,
        }
    }

    pub fn run(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(BIN);
        cmd.args(args)
            .env("BALLOTLEDGER_URL", &self.url)
            .env("BALLOTLEDGER_KEYSTORE", &self.keystore)
            .env_remove("BALLOTLEDGER_IDENTITY")
            .env_remove("BALLOTLEDGER_CONFIG")
            .stdin(Stdio::null());
        match &self.passphrase {
            Some(p) => cmd.env("BALLOTLEDGER_PASSPHRASE", p),
            None => cmd.env_remove("BALLOTLEDGER_PASSPHRASE"),
        };
        cmd.output().unwrap()
    }

    /// Runs and requires exit 0, returning trimmed stdout.
    pub fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap().trim().to_string()
    }

    pub fn json(&self, args: &[&str]) -> serde_json::Value {
        let mut all = vec!["--json"];
        all.extend_from_slice(args);
        serde_json::from_str(&self.ok(&all)).unwrap()
    }
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}
