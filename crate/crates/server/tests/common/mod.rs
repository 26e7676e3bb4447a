#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use qruntime::api::{self, ServerHandle};
use qruntime::auth::StaticTokens;
use qruntime::Client;
use qruntime_core::backend::DeviceConfig;
use qruntime_core::platform::{Platform, PlatformConfig};
use qruntime_core::scheduler::SchedulerConfig;

pub const BELL: &str = "qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q -> c;";
pub const RY: &str = "input float theta; qreg q[1]; creg c[1]; ry(theta) q[0]; measure q[0] -> c[0];";

pub fn fleet() -> Vec<DeviceConfig> {
    vec![DeviceConfig::linear("sim-a", 3).ideal(), DeviceConfig::ring("sim-b", 4).ideal()]
}

pub fn start(configure: impl FnOnce(&mut PlatformConfig)) -> ServerHandle {
    let mut cfg = PlatformConfig {
        fleet: fleet(),
        scheduler: SchedulerConfig::default(),
        tick: Duration::from_millis(2),
        ..PlatformConfig::default()
    };
    configure(&mut cfg);
    let platform = Platform::start(cfg).expect("platform");
    let tokens = StaticTokens::new([("alice-token", "alice"), ("bob-token", "bob")]);
    api::spawn(Arc::new(platform), Arc::new(tokens), SocketAddr::from(([127, 0, 0, 1], 0))).expect("bind")
}

pub fn alice(h: &ServerHandle) -> Client {
    Client::new(h.url(), Some("alice-token".into()))
}

pub fn bob(h: &ServerHandle) -> Client {
    Client::new(h.url(), Some("bob-token".into()))
}

pub mod child {
    use std::io::{BufRead, BufReader};
    use std::path::{Path, PathBuf};
    use std::process::{Child, Command, Output, Stdio};

    pub const TOKEN: &str = "cli-token";

    pub fn bin() -> &'static str {
        env!("CARGO_BIN_EXE_qruntime")
    }

    /// Writes a config for `backends` (TOML `[[backends]]` tables) under `dir`.
    pub fn write_config(dir: &Path, backends: &str) -> PathBuf {
        std::fs::write(dir.join("tokens.txt"), format!("# test tokens\n{TOKEN} carol\n")).unwrap();
        let path = dir.join("qruntime.toml");
        let text = format!(
            "port = 0\ntoken_file = \"tokens.txt\"\nstate_dir = \"state\"\nworkers = 1\n\n{backends}"
        );
        std::fs::write(&path, text).unwrap();
        path
    }

    pub struct Server {
        pub child: Child,
        pub url: String,
    }

    impl Server {
        pub fn start(config: &Path) -> Server {
            let mut child = Command::new(bin())
                .args(["serve", "--config"])
                .arg(config)
                .env_remove("QRUNTIME_PORT")
                .stdout(Stdio::piped())
                .stderr(Stdio::null())
                .spawn()
                .expect("spawn server");
            let mut line = String::new();
            BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
            let url = line
                .trim()
                .rsplit(' ')
                .next()
                .filter(|u| u.starts_with("http://"))
                .unwrap_or_else(|| panic!("no banner: {line:?}"))
                .to_string();
            Server { child, url }
        }

        pub fn run(&self, args: &[&str]) -> Output {
            Command::new(bin())
                .args(args)
                .env("QRUNTIME_URL", &self.url)
                .env("QRUNTIME_TOKEN", TOKEN)
                .output()
                .unwrap()
        }

        /// SIGKILL, no chance to flush anything.
        pub fn kill(mut self) {
            self.child.kill().unwrap();
            self.child.wait().unwrap();
        }

        /// SIGINT and wait for a clean exit.
        pub fn interrupt(mut self) -> std::process::ExitStatus {
            Command::new("kill")
                .args(["-INT", &self.child.id().to_string()])
                .status()
                .unwrap();
            self.child.wait().unwrap()
        }
    }

    impl Drop for Server {
        fn drop(&mut self) {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
