use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use pneuma_core::chip::{build_fsm_chip, ChipOptions};
use pneuma_core::config::{EngineConfig, PlantConfig, Topology, CONFIG_ENV};
use pneuma_core::engine::{
    default_probes, export_vcd, parse_clock_spec, parse_stimulus, read_logic, Simulator, Stimulus,
};
use pneuma_core::fluidics::cosim::DEFAULT_MIXER_SCRIPT;
use pneuma_core::fluidics::{
    dilution_chip, history_tsv, mixer_chip, run_embedded, Compartment, LadderTopology, MixerTopology, Script, R1, R2,
};
use pneuma_core::fsmc::{compile, parse_fsm, state_label, to_table, verify, FsmcError, VerifyOptions};
use pneuma_core::netlist::{parse_netlist, validate, Netlist, Probe};
use pneuma_core::panel::serve;
use pneuma_core::pla::{decode_membrane, eval_pattern, expand_pla, quasi_static_table, PlaPorts};

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CAPACITY: u8 = 3;

#[derive(Parser)]
#[command(name = "pneuma", version, about = "Pneumatic logic simulator and FSM-to-PLA compiler")]
struct Cli {
    /// Engine config file (key = value)
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile an FSM program to a membrane file
    Compile {
        fsm: PathBuf,
        /// Output membrane file (default: input with .membrane extension)
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Print the transition table
        #[arg(long)]
        table: bool,
        /// Print the minimized equations
        #[arg(long)]
        sop: bool,
    },
    /// Timed simulation of a netlist and/or an FSM chip programmed by a membrane
    Simulate {
        netlist: Option<PathBuf>,
        #[arg(long)]
        membrane: Option<PathBuf>,
        /// Power-up register state for the membrane chip, e.g. 00
        #[arg(long, default_value = "00")]
        init_state: String,
        /// Clock CLK from the on-chip button instead of an external line
        #[arg(long)]
        button: bool,
        /// Clock, e.g. "CLK period=40 duty=0.5 phase=20" (repeatable)
        #[arg(long)]
        clock: Vec<String>,
        /// Stimulus TSV (time node value)
        #[arg(long)]
        stimulus: Option<PathBuf>,
        /// Value-change dump output
        #[arg(long)]
        vcd: Option<PathBuf>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Recording stride in steps
        #[arg(long, default_value_t = 10)]
        stride: u64,
    },
    /// Valve-level PLA truth table next to the Boolean oracle
    Truthtable {
        #[arg(long)]
        membrane: PathBuf,
        /// Test hook: replace this valve with a permanent channel
        #[arg(long, value_name = "VALVE")]
        inject_stuck_open: Option<String>,
    },
    /// Compile and check every transition at valve level
    Verify {
        fsm: PathBuf,
        /// Use this membrane instead of the compiled pattern
        #[arg(long)]
        membrane: Option<PathBuf>,
        #[arg(long)]
        period: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Skip the minimum-period search
        #[arg(long)]
        no_search: bool,
    },
    /// Check a netlist and list warnings
    Validate { netlist: PathBuf },
    /// Scripted co-simulation of a liquid-handling demo
    Demo {
        which: DemoKind,
        /// Button script (time press|release|end), mixer only
        #[arg(long, conflicts_with = "serve")]
        script: Option<PathBuf>,
        /// Start the panel service instead
        #[arg(long)]
        serve: bool,
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: String,
        /// Plant config file
        #[arg(long)]
        plant: Option<PathBuf>,
        /// Write composition history TSV
        #[arg(long)]
        history: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoKind {
    Mixer,
    Dilution,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_USAGE,
            error: e.into(),
        }
    }
}

fn fail(code: u8, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let cfg = EngineConfig::load(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Compile { fsm, out, table, sop } => cmd_compile(&fsm, out, table, sop),
        Cmd::Simulate {
            netlist,
            membrane,
            init_state,
            button,
            clock,
            stimulus,
            vcd,
            t_end,
            dt,
            stride,
        } => cmd_simulate(
            &cfg,
            SimArgs {
                netlist,
                membrane,
                init_state,
                button,
                clock,
                stimulus,
                vcd,
                t_end,
                dt,
                stride,
            },
        ),
        Cmd::Truthtable {
            membrane,
            inject_stuck_open,
        } => cmd_truthtable(&cfg, &membrane, inject_stuck_open.as_deref()),
        Cmd::Verify {
            fsm,
            membrane,
            period,
            dt,
            no_search,
        } => cmd_verify(&cfg, &fsm, membrane.as_deref(), period, dt, no_search),
        Cmd::Validate { netlist } => cmd_validate(&netlist),
        Cmd::Demo {
            which,
            script,
            serve: srv,
            addr,
            plant,
            history,
        } => cmd_demo(&cfg, which, script.as_deref(), srv, &addr, plant.as_deref(), history.as_deref()),
    }
}

fn cmd_compile(fsm: &Path, out: Option<PathBuf>, table: bool, sop: bool) -> Outcome {
    let text = read(fsm)?;
    let compiled = match compile(&text) {
        Ok(c) => c,
        Err(e @ FsmcError::Capacity(_)) => return Err(fail(EXIT_CAPACITY, anyhow!("{e}"))),
        Err(e) => return Err(fail(EXIT_USAGE, anyhow!("{}: {e}", fsm.display()))),
    };
    if table {
        print!("{}", compiled.table);
    }
    if sop {
        print!("{}", compiled.sop);
    }
    let out = out.unwrap_or_else(|| fsm.with_extension("membrane"));
    write(&out, &compiled.membrane)?;
    info!("wrote {}", out.display());
    Ok(0)
}

struct SimArgs {
    netlist: Option<PathBuf>,
    membrane: Option<PathBuf>,
    init_state: String,
    button: bool,
    clock: Vec<String>,
    stimulus: Option<PathBuf>,
    vcd: Option<PathBuf>,
    t_end: Option<f64>,
    dt: Option<f64>,
    stride: u64,
}

fn cmd_simulate(cfg: &EngineConfig, a: SimArgs) -> Outcome {
    if a.netlist.is_none() && a.membrane.is_none() {
        return Err(anyhow!("simulate needs a netlist file, --membrane, or both").into());
    }
    let mut net = Netlist::new();
    if let Some(m) = &a.membrane {
        let pattern = decode_membrane(&read(m)?).with_context(|| m.display().to_string())?;
        let init = pneuma_core::fsmc::dsl::parse_state(&a.init_state)
            .ok_or_else(|| anyhow!("bad --init-state '{}'", a.init_state))?;
        let opts = ChipOptions {
            params: cfg.cell_params(),
            init_state: Some((init & 2 != 0, init & 1 != 0)),
            button_clock: a.button,
        };
        net = build_fsm_chip(&pattern, &opts)?.netlist;
    }
    if let Some(path) = &a.netlist {
        let extra = parse_netlist(&read(path)?).with_context(|| path.display().to_string())?;
        net.union(&extra)?;
    }
    let mut stim = match &a.stimulus {
        Some(p) => parse_stimulus(&read(p)?).with_context(|| p.display().to_string())?,
        None => Stimulus::new(),
    };
    for spec in &a.clock {
        let (node, clock) = parse_clock_spec(&format!("clock {spec}"))?;
        stim = stim.clock(&node, clock);
    }
    let dt = a.dt.unwrap_or(cfg.dt);
    let t_end = a.t_end.unwrap_or_else(|| {
        let longest = stim.clocks.iter().map(|(_, c)| c.period).fold(0.0, f64::max);
        if longest > 0.0 {
            10.0 * longest
        } else {
            100.0
        }
    });
    let mut sim = Simulator::new(&net, dt)?;
    for (node, clock) in &stim.clocks {
        sim.add_clock(node, *clock)?;
    }
    let probes = default_probes(&net);
    sim.record(&probes, a.stride.max(1))?;
    for ev in stim.sorted_events() {
        if ev.time > t_end {
            break;
        }
        sim.run_until(ev.time);
        sim.apply(ev)?;
    }
    sim.run_until(t_end);
    let wave = sim.take_waveform().expect("recording enabled");
    match &a.vcd {
        Some(p) => write(p, &export_vcd(&wave, None))?,
        None => {
            for p in &probes {
                if let Probe::Node(id) = p {
                    println!("{id}\t{}", read_logic(sim.pressure(id).unwrap_or(f64::NAN)));
                }
            }
        }
    }
    Ok(0)
}

fn cmd_truthtable(cfg: &EngineConfig, membrane: &Path, stuck: Option<&str>) -> Outcome {
    let pattern = decode_membrane(&read(membrane)?).with_context(|| membrane.display().to_string())?;
    let ports = PlaPorts::default();
    let mut net = expand_pla(&pattern, &ports, &cfg.cell_params())?;
    if let Some(v) = stuck {
        net.short_valve(v)?;
    }
    let valve = quasi_static_table(&net, &ports)?;
    let mut out = String::from("S1\tS0\tA\tN1\tN0\tN1*\tN0*\n");
    let mut mismatches = 0;
    for (row, (v1, v0)) in valve.iter().enumerate() {
        let (s1, s0, a) = (row & 4 != 0, row & 2 != 0, row & 1 != 0);
        let (o1, o0) = eval_pattern(&pattern, s1, s0, a);
        if v1.as_bit() != Some(o1) || v0.as_bit() != Some(o0) {
            mismatches += 1;
        }
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{v1}\t{v0}\t{}\t{}",
            s1 as u8, s0 as u8, a as u8, o1 as u8, o0 as u8
        );
    }
    print!("{out}");
    if mismatches > 0 {
        return Err(fail(
            EXIT_VERIFY,
            anyhow!("{mismatches} of 8 rows differ from the Boolean oracle (columns marked *)"),
        ));
    }
    Ok(0)
}

fn cmd_verify(
    cfg: &EngineConfig,
    fsm: &Path,
    membrane: Option<&Path>,
    period: Option<f64>,
    dt: Option<f64>,
    no_search: bool,
) -> Outcome {
    let text = read(fsm)?;
    let table = to_table(&parse_fsm(&text).map_err(|e| anyhow!("{}: {e}", fsm.display()))?);
    let pattern = match membrane {
        Some(m) => decode_membrane(&read(m)?).with_context(|| m.display().to_string())?,
        None => match compile(&text) {
            Ok(c) => c.pattern,
            Err(e @ FsmcError::Capacity(_)) => return Err(fail(EXIT_CAPACITY, anyhow!("{e}"))),
            Err(e) => return Err(e.into()),
        },
    };
    let opts = VerifyOptions {
        period: period.unwrap_or(cfg.period),
        dt: dt.unwrap_or(cfg.dt),
        params: cfg.cell_params(),
        search_period: !no_search,
    };
    let report = verify(&pattern, &table, &opts);
    println!("state\tA\texpected\tobserved\tresult");
    for c in &report.checks {
        println!(
            "{}\t{}\t{}\t{}\t{}",
            state_label(c.state),
            c.input as u8,
            state_label(c.expected),
            c.observed.map_or("xx".to_string(), state_label),
            if c.passed() { "pass" } else { "FAIL" }
        );
    }
    if !no_search {
        match report.min_period {
            Some(p) => println!("min_period\t{p:.4}"),
            None => println!("min_period\tnone"),
        }
    }
    if !report.all_passed() {
        let n = report.failures().count();
        return Err(fail(EXIT_VERIFY, anyhow!("{n} of 8 transitions failed at period {}", opts.period)));
    }
    Ok(0)
}

fn cmd_validate(path: &Path) -> Outcome {
    let net = parse_netlist(&read(path)?).with_context(|| path.display().to_string())?;
    let report = validate(&net);
    for d in &report {
        println!("{d}");
    }
    println!(
        "{} nodes, {} valves, {} channels, {} diagnostics",
        net.node_count(),
        net.valve_count(),
        net.channel_count(),
        report.len()
    );
    Ok(0)
}

fn composition_table(comps: &[Compartment]) -> String {
    let mut out = String::from("compartment\tsource\tfraction\n");
    for c in comps {
        for (src, f) in &c.composition {
            let _ = writeln!(out, "{}\t{src}\t{f:.9}", c.id);
        }
    }
    out
}

fn cmd_demo(
    cfg: &EngineConfig,
    which: DemoKind,
    script: Option<&Path>,
    srv: bool,
    addr: &str,
    plant: Option<&Path>,
    history: Option<&Path>,
) -> Outcome {
    if srv {
        eprintln!("panel service on {addr}");
        serve(addr, cfg.clone())?;
        return Ok(0);
    }
    let want = match which {
        DemoKind::Mixer => Topology::Mixer,
        DemoKind::Dilution => Topology::Ladder,
    };
    let plant_cfg = match plant {
        Some(p) => PlantConfig::load(p)?,
        None => PlantConfig::named(want),
    };
    if plant_cfg.topology != want {
        return Err(anyhow!("plant config topology does not match this demo").into());
    }
    let p = cfg.cell_params();
    let (comps, hist) = match which {
        DemoKind::Mixer => {
            let script = match script {
                Some(s) => Script::parse(&read(s)?)?,
                None => Script::parse(DEFAULT_MIXER_SCRIPT)?,
            };
            let t_end = script.end_time(300.0);
            let (co, _) = run_embedded(mixer_chip(&p)?, plant_cfg.mixer(), &script, t_end, cfg.dt, 10_000)?;
            let m: &MixerTopology = &co.plant;
            let mut comps = m.halves().to_vec();
            comps.push(Compartment::new("ring", m.ring_volume, m.ring()));
            println!("# final state {}", co.state().map_or("xx".into(), state_label));
            println!("# R1 {:.9} R2 {:.9}", m.fraction(R1), m.fraction(R2));
            (comps, co.history)
        }
        DemoKind::Dilution => {
            if script.is_some() {
                return Err(anyhow!("no button on chip: the dilution demo runs on its own clock").into());
            }
            let chip = dilution_chip(&p, plant_cfg.clock_period)?;
            let t_end = 4.5 * plant_cfg.clock_period;
            let (co, _) = run_embedded(chip, plant_cfg.ladder(), &Script::default(), t_end, cfg.dt, 10_000)?;
            let l: &LadderTopology = &co.plant;
            let series: Vec<String> = l.concentrations().iter().map(|c| format!("{c:.6}")).collect();
            println!("# series {}", series.join(" "));
            println!("# refilled {:.9}", l.refilled);
            (l.rungs.clone(), co.history)
        }
    };
    print!("{}", composition_table(&comps));
    if let Some(h) = history {
        write(h, &history_tsv(&hist))?;
    }
    Ok(0)
}
