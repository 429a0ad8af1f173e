use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use strongvelope::crypto::{DhKeyPair, SignKeyPair};
use strongvelope::scenario::{run_script, FailureKind};

/// Strongvelope group-messaging tools.
#[derive(Parser)]
#[command(name = "strongvelope", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an Ed25519 signing identity and an X25519 exchange identity.
    Keygen {
        /// Hex bytes to derive the keys from; omit for fresh random keys.
        #[arg(long)]
        seed: Option<String>,
    },
    /// Take a wire message apart record by record.
    ///
    /// Exits 1 when the wire does not parse or the signature is invalid.
    Dissect {
        /// The message as hex, or @PATH to read hex from a file.
        wire: String,
        /// The sender's Ed25519 public key (64 hex chars) to verify against.
        #[arg(long)]
        pubkey: Option<String>,
    },
    /// Run a scripted multi-party scenario.
    ///
    /// Exits 1 on a failed expectation, 2 on a script error.
    Scenario {
        /// Path to the scenario script.
        script: PathBuf,
        /// Hex bytes seeding all scenario randomness (default: empty).
        #[arg(long)]
        seed: Option<String>,
        /// Write the room log here, one `seq sender wire` hex line each.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Keygen { seed } => keygen(seed),
        Command::Dissect { wire, pubkey } => dissect(wire, pubkey),
        Command::Scenario {
            script,
            seed,
            export,
        } => scenario(script, seed, export),
    };
    ExitCode::from(code)
}

fn keygen(seed: Option<String>) -> u8 {
    let (sign, dh) = match seed {
        Some(hex_seed) => {
            let bytes = match hex::decode(&hex_seed) {
                Ok(bytes) => bytes,
                Err(error) => {
                    eprintln!("--seed must be hex: {error}");
                    return 2;
                }
            };
            let mut rng = ChaCha20Rng::from_seed(Sha256::digest(&bytes).into());
            (SignKeyPair::generate(&mut rng), DhKeyPair::generate(&mut rng))
        }
        None => {
            let mut rng = rand_chacha::rand_core::OsRng;
            (SignKeyPair::generate(&mut rng), DhKeyPair::generate(&mut rng))
        }
    };
    println!("ed25519 seed:   {}", hex::encode(sign.seed()));
    println!("ed25519 public: {}", hex::encode(sign.public_bytes()));
    println!("x25519 secret:  {}", hex::encode(dh.secret_bytes()));
    println!("x25519 public:  {}", hex::encode(dh.public_bytes()));
    0
}

fn dissect(wire: String, pubkey: Option<String>) -> u8 {
    let raw = if let Some(path) = wire.strip_prefix('@') {
        match fs::read_to_string(path) {
            Ok(text) => text,
            Err(error) => {
                eprintln!("cannot read {path}: {error}");
                return 2;
            }
        }
    } else {
        wire
    };
    let compact: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    let bytes = match hex::decode(&compact) {
        Ok(bytes) => bytes,
        Err(error) => {
            eprintln!("wire is not valid hex: {error}");
            return 2;
        }
    };
    let key: Option<[u8; 32]> = match pubkey {
        None => None,
        Some(hex_key) => {
            match hex::decode(&hex_key)
                .ok()
                .and_then(|bytes| <[u8; 32]>::try_from(bytes).ok())
            {
                Some(key) => Some(key),
                None => {
                    eprintln!("--pubkey must be 64 hex characters");
                    return 2;
                }
            }
        }
    };

    let report = strongvelope::dissect(&bytes, key.as_ref());
    print!("{}", report.text);
    if report.error.is_some() || report.signature_valid == Some(false) {
        1
    } else {
        0
    }
}

fn scenario(script: PathBuf, seed: Option<String>, export: Option<PathBuf>) -> u8 {
    let text = match fs::read_to_string(&script) {
        Ok(text) => text,
        Err(error) => {
            eprintln!("cannot read {}: {error}", script.display());
            return 2;
        }
    };
    let seed_bytes = match seed {
        None => Vec::new(),
        Some(hex_seed) => match hex::decode(&hex_seed) {
            Ok(bytes) => bytes,
            Err(error) => {
                eprintln!("--seed must be hex: {error}");
                return 2;
            }
        },
    };

    let run = run_script(&text, &seed_bytes);
    print!("{}", run.transcript);
    if let Some(path) = export {
        if let Err(error) = fs::write(&path, &run.export) {
            eprintln!("cannot write {}: {error}", path.display());
            return 2;
        }
    }
    match run.failure.map(|failure| failure.kind) {
        None => 0,
        Some(FailureKind::Assertion) => 1,
        Some(FailureKind::Script) => 2,
    }
}
