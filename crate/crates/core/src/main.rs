use clap::{Args, Parser, Subcommand};
use lagarto::asm::{assemble, emit_hex, load_hex, Layout};
use lagarto::debug::{self, DebugSession};
use lagarto::isa::{decode, disassemble};
use lagarto::pipeline::{FunctionalUnitSpec, Machine, MachineConfig, RunLimits, RunStats, StopReason};
use lagarto::predictor::PredictorKind;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_FAULT: u8 = 2;
const DEFAULT_MAX_CYCLES: u64 = 10_000_000;

#[derive(Parser)]
#[command(name = "lagarto", version, about = "Lagarto I pipeline simulator and toolchain")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Assemble a source file into hex memory images
    Asm {
        source: PathBuf,
        /// Instruction image to write
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        /// Data image to write [default: <source stem>.dmem.hex next to the output]
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Simulate a program cycle by cycle
    Run(RunArgs),
    /// Serve the WebSocket debugger
    Serve {
        #[arg(long, default_value_t = debug::DEFAULT_PORT)]
        port: u16,
    },
    /// Disassemble an instruction image
    Disasm { image: PathBuf },
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("program").args(["src", "imem"])))]
struct RunArgs {
    /// Assembly source to assemble and run
    #[arg(long)]
    src: Option<PathBuf>,
    /// Instruction memory image
    #[arg(long)]
    imem: Option<PathBuf>,
    /// Data memory image
    #[arg(long)]
    dmem: Option<PathBuf>,
    #[arg(long)]
    max_cycles: Option<u64>,
    #[arg(long, value_parser = parse_predictor)]
    predictor: Option<PredictorKind>,
    /// Branch history table entries
    #[arg(long)]
    bht: Option<usize>,
    /// Branch target buffer entries
    #[arg(long)]
    btb: Option<usize>,
    #[arg(long)]
    cache_stats: bool,
    /// Write one JSON line per cycle
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write final statistics as JSON
    #[arg(long)]
    stats: Option<PathBuf>,
    /// TOML file with defaults for any of the above
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_predictor(s: &str) -> Result<PredictorKind, String> {
    match s {
        "twobit" => Ok(PredictorKind::TwoBitBtb),
        "static" => Ok(PredictorKind::StaticNotTaken),
        _ => Err(format!("unknown predictor `{s}` (expected twobit or static)")),
    }
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    src: Option<PathBuf>,
    imem: Option<PathBuf>,
    dmem: Option<PathBuf>,
    max_cycles: Option<u64>,
    predictor: Option<String>,
    bht: Option<usize>,
    btb: Option<usize>,
    cache_stats: Option<bool>,
    trace: Option<PathBuf>,
    stats: Option<PathBuf>,
    miss_penalty: Option<u32>,
    muldiv_latency: Option<u32>,
    #[serde(default)]
    units: BTreeMap<String, FunctionalUnitSpec>,
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap's own error exit status is 2, which is reserved for machine faults
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Cmd::Asm { source, output, data } => cmd_asm(&source, &output, data.as_deref()),
        Cmd::Run(args) => cmd_run(args),
        Cmd::Serve { port } => cmd_serve(port),
        Cmd::Disasm { image } => cmd_disasm(&image),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("lagarto: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_asm(source: &Path, output: &Path, data: Option<&Path>) -> Result<u8, Failure> {
    let src = read(source)?;
    let asm = assemble(&src, Layout::default())
        .map_err(|e| usage(format!("{}: {e}", source.display())))?;
    let data_path = match data {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = source.file_stem().unwrap_or_default().to_string_lossy();
            output.with_file_name(format!("{stem}.dmem.hex"))
        }
    };
    write(output, &emit_hex(&asm.text_image()))?;
    write(&data_path, &emit_hex(&asm.data_image()))?;
    Ok(0)
}

fn cmd_disasm(image: &Path) -> Result<u8, Failure> {
    let text = read(image)?;
    let base = MachineConfig::default().memory.imem_base;
    let img = load_hex(&text, base).map_err(|e| usage(format!("{}: {e}", image.display())))?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for seg in &img.segments {
        for (k, &w) in seg.words.iter().enumerate() {
            let addr = seg.base.wrapping_add(4 * k as u32);
            let text = match decode(w) {
                Ok(i) => disassemble(&i),
                Err(_) => format!(".word 0x{w:08X}"),
            };
            let _ = writeln!(out, "{addr:08x}: {w:08x}  {text}");
        }
    }
    Ok(0)
}

fn cmd_serve(port: u16) -> Result<u8, Failure> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| usage(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
            .await
            .map_err(|e| usage(format!("cannot listen on port {port}: {e}")))?;
        let machine = Machine::new(MachineConfig::default(), Default::default())
            .map_err(|e| usage(e.to_string()))?;
        log::info!("debugger listening on ws://localhost:{port}/debug");
        eprintln!("lagarto: debugger listening on ws://localhost:{port}/debug");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        debug::serve(listener, DebugSession::new(machine), shutdown)
            .await
            .map_err(|e| usage(e.to_string()))?;
        Ok(0)
    })
}

/// Flags override the config file, which overrides built-in defaults.
struct Resolved {
    src: Option<PathBuf>,
    imem: Option<PathBuf>,
    dmem: Option<PathBuf>,
    max_cycles: u64,
    trace: Option<PathBuf>,
    stats: Option<PathBuf>,
    machine: MachineConfig,
}

fn resolve(args: RunArgs) -> Result<Resolved, Failure> {
    let file: FileConfig = match &args.config {
        Some(p) => toml::from_str(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => FileConfig::default(),
    };
    let mut machine = MachineConfig::default();
    let predictor = match args.predictor {
        Some(k) => Some(k),
        None => file.predictor.as_deref().map(parse_predictor).transpose().map_err(usage)?,
    };
    if let Some(k) = predictor {
        machine.predictor.kind = k;
    }
    if let Some(n) = args.bht.or(file.bht) {
        machine.predictor.bht_entries = n;
    }
    if let Some(n) = args.btb.or(file.btb) {
        machine.predictor.btb_entries = n;
    }
    machine.memory.cache_stats = args.cache_stats || file.cache_stats.unwrap_or(false);
    if let Some(p) = file.miss_penalty {
        machine.memory.miss_penalty = p;
    }
    machine.muldiv_latency = file.muldiv_latency;
    for (name, spec) in file.units {
        let slot = match name.as_str() {
            "INT" => &mut machine.units.int,
            "LOADSTORE" => &mut machine.units.load_store,
            "BRANCH" => &mut machine.units.branch,
            "FP_SIMPLE" => &mut machine.units.fp_simple,
            "FP_MED" => &mut machine.units.fp_med,
            "FP_LONG" => &mut machine.units.fp_long,
            other => return Err(usage(format!("unknown unit `{other}` in config"))),
        };
        *slot = spec;
    }
    machine.validate().map_err(|e| usage(e.to_string()))?;

    let (src, imem) = match (args.src, args.imem) {
        (None, None) => (file.src, file.imem),
        flags => flags,
    };
    if src.is_some() == imem.is_some() {
        return Err(usage("give exactly one of --src or --imem"));
    }
    Ok(Resolved {
        src,
        imem,
        dmem: args.dmem.or(file.dmem),
        max_cycles: args.max_cycles.or(file.max_cycles).unwrap_or(DEFAULT_MAX_CYCLES),
        trace: args.trace.or(file.trace),
        stats: args.stats.or(file.stats),
        machine,
    })
}

fn cmd_run(args: RunArgs) -> Result<u8, Failure> {
    let r = resolve(args)?;
    let mem = &r.machine.memory;
    let image = if let Some(src) = &r.src {
        if r.dmem.is_some() {
            return Err(usage("--dmem cannot be combined with --src"));
        }
        assemble(&read(src)?, Layout::from(mem))
            .map_err(|e| usage(format!("{}: {e}", src.display())))?
            .image()
    } else {
        let path = r.imem.as_ref().expect("checked in resolve");
        let text = load_hex(&read(path)?, mem.imem_base)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let data = match &r.dmem {
            Some(p) => load_hex(&read(p)?, mem.dmem_base).map_err(|e| usage(format!("{}: {e}", p.display())))?,
            None => Default::default(),
        };
        text.merge(data)
    };
    let mut machine = Machine::new(r.machine.clone(), image).map_err(|e| usage(e.to_string()))?;
    let limits = RunLimits::cycles(r.max_cycles);

    let stats = match &r.trace {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            let mut err = None;
            let stats = machine.run_traced(&limits, |rep| {
                if err.is_none() {
                    if let Err(e) = serde_json::to_writer(&mut w, rep).map_err(io::Error::from).and_then(|_| w.write_all(b"\n")) {
                        err = Some(e);
                    }
                }
            });
            if let Some(e) = err.or_else(|| w.flush().err()) {
                return Err(usage(format!("{}: {e}", path.display())));
            }
            stats
        }
        None => machine.run(&limits),
    };

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let output = machine.output();
    let _ = out.write_all(output);
    if !output.is_empty() && !output.ends_with(b"\n") {
        let _ = writeln!(out);
    }
    print_stats(&mut out, &stats, &machine);
    if let Some(path) = &r.stats {
        let json = serde_json::to_string_pretty(&stats).expect("stats serialize");
        write(path, &json)?;
    }
    Ok(match machine.halt_reason() {
        Some(h) if h.is_fault() => {
            eprintln!("lagarto: machine fault: {h}");
            EXIT_FAULT
        }
        _ => 0,
    })
}

fn print_stats(out: &mut impl Write, s: &RunStats, m: &Machine) {
    let end = match (s.stop, m.halt_reason()) {
        (Some(StopReason::CycleLimit), _) => "cycle limit".to_string(),
        (_, Some(h)) => h.name().to_string(),
        _ => "stopped".to_string(),
    };
    let _ = writeln!(out, "--- stats ---");
    let _ = writeln!(out, "end:          {end}");
    let _ = writeln!(out, "cycles:       {}", s.cycles);
    let _ = writeln!(out, "retired:      {}", s.instructions_retired);
    let _ = writeln!(out, "ipc:          {:.4}", s.ipc);
    let _ = writeln!(out, "branches:     {}", s.branch_count);
    let _ = writeln!(out, "mispredicts:  {} ({})", s.mispredicts, m.predictor().name());
    let _ = writeln!(
        out,
        "stalls:       RAW_WAIT={} WAW_WAIT={} WB_PORT_CONFLICT={} UNIT_BUSY={}",
        s.stalls.raw_wait, s.stalls.waw_wait, s.stalls.wb_port_conflict, s.stalls.unit_busy
    );
    for (name, c) in [("icache", s.icache), ("dcache", s.dcache)] {
        if let Some(c) = c {
            let _ = writeln!(out, "{name}:       accesses={} hits={} misses={}", c.accesses, c.hits, c.misses);
        }
    }
}
