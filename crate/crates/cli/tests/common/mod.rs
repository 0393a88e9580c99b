#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

pub const EXAMPLE_ERAN: &str = "ReLU\n[[1], [1], [-1]]\n[-1, 0, 0]\nAffine\n[[1, -1, -1]]\n[0]\n";

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_exactnet"))
}

pub fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env_remove("SYRENN_THREADS")
        .env_remove("SYRENN_PORT")
        .output()
        .unwrap()
}

pub fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// A running `exactnet serve` on an ephemeral port.
pub struct Server {
    pub child: Child,
    pub port: u16,
}

impl Server {
    pub fn start() -> Self {
        #[allow(clippy::zombie_processes)]
        let mut child = bin()
            .args(["serve", "--port", "0"])
            .stderr(Stdio::piped())
            .stdout(Stdio::null())
            .spawn()
            .unwrap();
        let mut stderr = BufReader::new(child.stderr.take().unwrap());
        let mut line = String::new();
        loop {
            line.clear();
            assert!(
                stderr.read_line(&mut line).unwrap() > 0,
                "server exited before listening"
            );
            if let Some(addr) = line.trim().strip_prefix("listening on ") {
                let port = addr.rsplit(':').next().unwrap().parse().unwrap();
                // Keep draining so request logging never blocks the server.
                std::thread::spawn(move || for _ in stderr.lines() {});
                return Server { child, port };
            }
        }
    }

    pub fn connect(&self) -> Client {
        let stream = TcpStream::connect(("127.0.0.1", self.port)).unwrap();
        Client {
            reader: BufReader::new(stream.try_clone().unwrap()),
            stream,
        }
    }

    /// Sends SIGINT and returns the exit code.
    pub fn interrupt(mut self) -> Option<i32> {
        let status = Command::new("kill")
            .args(["-INT", &self.child.id().to_string()])
            .status()
            .unwrap();
        assert!(status.success());
        self.child.wait().unwrap().code()
    }
}

pub struct Client {
    stream: TcpStream,
    reader: BufReader<TcpStream>,
}

impl Client {
    pub fn request(&mut self, line: &str) -> String {
        self.stream.write_all(line.as_bytes()).unwrap();
        self.stream.write_all(b"\n").unwrap();
        let mut reply = String::new();
        self.reader.read_line(&mut reply).unwrap();
        assert!(reply.ends_with('\n'));
        reply.pop();
        reply
    }

    /// Opens a session and appends the layers of `network_json`.
    pub fn session(&mut self, network_json: &str) -> String {
        let net: serde_json::Value = serde_json::from_str(network_json).unwrap();
        let reply: serde_json::Value =
            serde_json::from_str(&self.request(&format!(r#"{{"op":"open","input_dim":{}}}"#, net["input_dim"])))
                .unwrap();
        let token = reply["session"].as_str().unwrap().to_string();
        for layer in net["layers"].as_array().unwrap() {
            let reply = self.request(&format!(r#"{{"op":"append","session":"{token}","layer":{layer}}}"#));
            let parsed: serde_json::Value = serde_json::from_str(&reply).unwrap();
            assert_eq!(parsed["ok"], true, "{reply}");
        }
        token
    }
}

/// The bytes of the `"result"` member of a success reply, as sent.
pub fn result_bytes(reply: &str) -> &str {
    reply
        .strip_prefix(r#"{"ok":true,"result":"#)
        .and_then(|r| r.strip_suffix('}'))
        .unwrap_or_else(|| panic!("not a result reply: {reply}"))
}
