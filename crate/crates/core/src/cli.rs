//! The `ibeetfa` command-line tool.
//!
//! Exit codes: 0 success (and `EQUAL`), 1 `NOT-EQUAL` or an invalid parameter
//! set, 2 rejection, 64 usage error, 65 unreadable or malformed input, 70
//! internal failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::authz::{self, TestOutcome, TrapdoorT1, TrapdoorT2, TrapdoorT3};
use crate::error::Error;
use crate::format::{self, Artifact, CiphertextFile};
use crate::hash::BitString;
use crate::params::{preset, validate_params, ParamSet, PRESET_NAMES};
use crate::sampler::RandomSource;
use crate::scheme::{self, Ciphertext, Identity, Message, PublicParams, UserSecretKey};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_EQUAL: i32 = 1;
pub const EXIT_REJECT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_SOFTWARE: i32 = 70;

const PRESET_WARNING: &str = "warning: preset parameter sets provide no cryptographic security";

#[derive(Parser, Debug)]
#[command(name = "ibeetfa", version, about = "Lattice IBE with equality test and flexible authorization")]
struct Cli {
    /// Preset name (toy, small) or path to a TOML parameter file
    #[arg(long, global = true, default_value = "toy")]
    params: String,

    /// Hex seed (up to 32 bytes) for reproducible output
    #[arg(long, global = true)]
    seed: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate public parameters and the master key
    Setup {
        #[arg(long, default_value = "pp.ibfa")]
        pp: PathBuf,
        #[arg(long, default_value = "msk.ibfa")]
        msk: PathBuf,
    },
    /// Derive the secret key of an identity
    Extract {
        #[arg(long, default_value = "pp.ibfa")]
        pp: PathBuf,
        #[arg(long, default_value = "msk.ibfa")]
        msk: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypt a message file for an identity
    Encrypt {
        #[arg(long, default_value = "pp.ibfa")]
        pp: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decrypt a ciphertext file
    Decrypt {
        #[arg(long, default_value = "pp.ibfa")]
        pp: PathBuf,
        #[arg(long)]
        sk: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Issue an authorization trapdoor
    Td(TdArgs),
    /// Test whether two ciphertexts hold the same message
    Test(TestArgs),
    /// Parameter-set utilities
    Params {
        #[command(subcommand)]
        action: ParamsAction,
    },
}

#[derive(Args, Debug)]
struct TdArgs {
    #[arg(long = "type", value_parser = clap::value_parser!(u8).range(1..=3))]
    kind: u8,
    #[arg(long, default_value = "pp.ibfa")]
    pp: PathBuf,
    #[arg(long)]
    sk: PathBuf,
    /// Ciphertext to bind (required for type 2, selects the ciphertext side for type 3)
    #[arg(long)]
    ct: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long = "type", value_parser = clap::value_parser!(u8).range(1..=3))]
    kind: u8,
    #[arg(long, default_value = "pp.ibfa")]
    pp: PathBuf,
    #[arg(long)]
    td_i: PathBuf,
    #[arg(long)]
    td_j: PathBuf,
    #[arg(long)]
    ct_i: PathBuf,
    #[arg(long)]
    ct_j: PathBuf,
}

#[derive(Subcommand, Debug)]
enum ParamsAction {
    /// Check a parameter set against every constraint
    Validate,
}

/// Failure of one command, mapped to an exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Internal(_) => EXIT_SOFTWARE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Load(_) => Failure::Data(e.to_string()),
            Error::UnknownPreset(_) | Error::InvalidParams(_) => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Runs the tool on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.code()
        }
    }
}

fn load_params(source: &str) -> std::result::Result<(ParamSet, bool), Failure> {
    if PRESET_NAMES.contains(&source) {
        return Ok((preset(source)?, true));
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(Failure::Usage(format!("{source:?} is neither a preset ({}) nor a readable file", PRESET_NAMES.join(", "))));
    }
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let params: ParamSet = toml::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok((params, false))
}

fn rng_from(seed: Option<&str>) -> std::result::Result<RandomSource, Failure> {
    match seed {
        None => Ok(RandomSource::from_os_rng()),
        Some(s) => {
            let bytes = hex::decode(s).map_err(|e| Failure::Usage(format!("--seed: {e}")))?;
            RandomSource::from_seed_bytes(&bytes).map_err(|_| Failure::Usage("--seed: at most 32 bytes".into()))
        }
    }
}

fn read_file(path: &Path) -> std::result::Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load<T: Artifact>(path: &Path, params: &ParamSet) -> std::result::Result<T, Failure> {
    let bytes = read_file(path)?;
    format::decode_with::<T>(&bytes, params).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

/// Writes to a sibling temporary file, then renames over `path`.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::result::Result<(), Failure> {
    let name = path.file_name().ok_or_else(|| Failure::Usage(format!("{}: not a file path", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let io = |e: std::io::Error| Failure::Internal(format!("{}: {e}", path.display()));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

fn message_from_bytes(bytes: &[u8], t: usize) -> std::result::Result<Message, Failure> {
    if bytes.len() * 8 > t {
        return Err(Failure::Data(format!("message is {} bytes; at most {} bits fit", bytes.len(), t)));
    }
    let mut bits = BitString::zeros(t);
    for i in 0..bytes.len() * 8 {
        bits.set(i, bytes[i / 8] >> (i % 8) & 1 == 1);
    }
    Ok(Message::new(bits, t)?)
}

fn message_to_bytes(msg: &Message, len: usize) -> Vec<u8> {
    msg.bits().as_bytes()[..len].to_vec()
}

fn outcome_line(outcome: TestOutcome) -> (&'static str, i32) {
    match outcome {
        TestOutcome::Equal => ("EQUAL", EXIT_OK),
        TestOutcome::NotEqual => ("NOT-EQUAL", EXIT_NOT_EQUAL),
        TestOutcome::Reject => ("REJECT", EXIT_REJECT),
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let (params, is_preset) = load_params(&cli.params)?;
    let mut rng = rng_from(cli.seed.as_deref())?;
    let say = |w: &mut dyn Write, s: &str| {
        let _ = writeln!(w, "{s}");
    };

    match cli.command {
        Command::Params { action: ParamsAction::Validate } => {
            if is_preset {
                say(stderr, PRESET_WARNING);
            }
            let violations = validate_params(&params);
            if violations.is_empty() {
                say(stdout, "ok");
                return Ok(EXIT_OK);
            }
            for v in &violations {
                say(stdout, &format!("violated {v}"));
            }
            Ok(EXIT_NOT_EQUAL)
        }
        Command::Setup { pp, msk } => {
            if is_preset {
                say(stderr, PRESET_WARNING);
            }
            let (public, master) = scheme::setup(&params, &mut rng)?;
            write_atomic(&pp, &format::encode(&params, &public))?;
            write_atomic(&msk, &format::encode(&params, &master))?;
            Ok(EXIT_OK)
        }
        Command::Extract { pp, msk, id, out } => {
            let public: PublicParams = load(&pp, &params)?;
            let master: scheme::MasterSecretKey = load(&msk, &params)?;
            let id = Identity::from_name(&id, params.ell);
            let sk = scheme::extract(&public, &master, &id, &mut rng)?;
            write_atomic(&out, &format::encode(&params, &sk))?;
            Ok(EXIT_OK)
        }
        Command::Encrypt { pp, id, input, out } => {
            let public: PublicParams = load(&pp, &params)?;
            let bytes = read_file(&input)?;
            let msg = message_from_bytes(&bytes, params.t)?;
            let id = Identity::from_name(&id, params.ell);
            let ct = scheme::encrypt(&public, &id, &msg, &mut rng)?;
            let file = CiphertextFile { ct, message_len: bytes.len() as u64 };
            write_atomic(&out, &format::encode(&params, &file))?;
            Ok(EXIT_OK)
        }
        Command::Decrypt { pp, sk, input, out } => {
            let public: PublicParams = load(&pp, &params)?;
            let key: UserSecretKey = load(&sk, &params)?;
            let file: CiphertextFile = load(&input, &params)?;
            match scheme::decrypt(&public, &key, &file.ct, &mut rng)? {
                Some(msg) => {
                    write_atomic(&out, &message_to_bytes(&msg, file.message_len as usize))?;
                    Ok(EXIT_OK)
                }
                None => {
                    say(stdout, "REJECT");
                    Ok(EXIT_REJECT)
                }
            }
        }
        Command::Td(args) => {
            let public: PublicParams = load(&args.pp, &params)?;
            let key: UserSecretKey = load(&args.sk, &params)?;
            let ct: Option<Ciphertext> = match &args.ct {
                Some(path) => Some(load::<CiphertextFile>(path, &params)?.ct),
                None => None,
            };
            let bytes = match (args.kind, ct) {
                (1, _) => format::encode(&params, &authz::td1(&key)),
                (2, None) => return Err(Failure::Usage("td --type 2 needs --ct".into())),
                (2, Some(ct)) => match authz::td2(&public, &key, &ct, &mut rng)? {
                    Some(td) => format::encode(&params, &td),
                    None => {
                        say(stdout, "REJECT");
                        return Ok(EXIT_REJECT);
                    }
                },
                (_, None) => format::encode(&params, &authz::td3_basis(&key)),
                (_, Some(ct)) => match authz::td3_ct(&public, &key, &ct, &mut rng)? {
                    Some(td) => format::encode(&params, &td),
                    None => {
                        say(stdout, "REJECT");
                        return Ok(EXIT_REJECT);
                    }
                },
            };
            write_atomic(&args.out, &bytes)?;
            Ok(EXIT_OK)
        }
        Command::Test(args) => {
            let public: PublicParams = load(&args.pp, &params)?;
            let ct_i = load::<CiphertextFile>(&args.ct_i, &params)?.ct;
            let ct_j = load::<CiphertextFile>(&args.ct_j, &params)?.ct;
            let outcome = match args.kind {
                1 => {
                    let a: TrapdoorT1 = load(&args.td_i, &params)?;
                    let b: TrapdoorT1 = load(&args.td_j, &params)?;
                    authz::test1(&public, &a, &b, &ct_i, &ct_j, &mut rng)?
                }
                2 => {
                    let a: TrapdoorT2 = load(&args.td_i, &params)?;
                    let b: TrapdoorT2 = load(&args.td_j, &params)?;
                    authz::test2(&public, &a, &b, &ct_i, &ct_j)?
                }
                _ => {
                    let a: TrapdoorT3 = load(&args.td_i, &params)?;
                    let b: TrapdoorT3 = load(&args.td_j, &params)?;
                    authz::test3(&public, &a, &b, &ct_i, &ct_j, &mut rng)?
                }
            };
            let (line, code) = outcome_line(outcome);
            say(stdout, line);
            Ok(code)
        }
    }
}
