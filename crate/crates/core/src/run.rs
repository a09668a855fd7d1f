//! Command execution over parsed scenarios.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exact_reals::set_precision_rounds;
use crate::extension::{ex_certify_division, ex_efg_decide, ex_normalize, induced_groups, DecisionReport, Side};
use crate::perron::pe_monomial_divide;
use crate::scenario::{Query, QueryKind, Scenario};
use crate::transcript::{RunSettings, Transcript};
use crate::value_groups::{
    vg_fg_module_test, vg_initial_index_bruteforce, SubgroupEmbedding, ValueGroupSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Normalize,
    Divide,
    Certify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Normalize => "normalize",
            Command::Divide => "divide",
            Command::Certify => "certify",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Machine,
}

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub settings: RunSettings,
    pub trace: bool,
    pub format: Format,
}

/// Runs `command` on every matching query of the scenario (analyze also runs
/// when no query asks for it) and returns the report.
pub fn io_run(scenario: &Scenario, command: Command, config: &RunConfig) -> Result<String> {
    set_precision_rounds(config.settings.precision_rounds);
    let mut queries: Vec<&Query> = scenario
        .queries
        .iter()
        .filter(|q| q.kind.command() == command.name())
        .collect();
    let implicit;
    if queries.is_empty() {
        if matches!(command, Command::Analyze | Command::Normalize) {
            implicit = Query {
                kind: if command == Command::Analyze {
                    QueryKind::Analyze
                } else {
                    QueryKind::Normalize
                },
                options: Default::default(),
                line: 0,
            };
            queries.push(&implicit);
        } else {
            return Err(Error::precondition(format!("the scenario has no {} query", command.name())));
        }
    }
    let mut out = String::new();
    for q in queries {
        let mut settings = config.settings.clone();
        if let Some(m) = q.option_usize("max_steps")? {
            settings.max_steps = m;
        }
        if let Some(b) = q.option_usize("box")? {
            settings.box_radius = u32::try_from(b).map_err(|_| Error::Overflow("box radius"))?;
        }
        let report = match &q.kind {
            QueryKind::Analyze => analyze(scenario, &settings, config.format)?,
            QueryKind::Normalize => normalize(scenario, config)?,
            QueryKind::Divide { m1, m2 } => divide(scenario, m1, m2, &settings, config)?,
            QueryKind::Certify { g, h } => certify(scenario, g, h, &settings, config)?,
        };
        out.push_str(&report);
    }
    Ok(out)
}

fn groups(scenario: &Scenario) -> Result<(ValueGroupSpec, SubgroupEmbedding)> {
    if let Some(g) = &scenario.group {
        let emb = g
            .embedding
            .clone()
            .ok_or_else(|| Error::precondition("[group] has no embedding"))?;
        return Ok((g.spec.clone(), emb));
    }
    let ext = scenario
        .extension
        .as_ref()
        .ok_or_else(|| Error::precondition("the scenario has neither [group] nor [extension]"))?;
    induced_groups(ext)
}

fn factors_text(f: &[u64]) -> String {
    let nontrivial: Vec<String> = f.iter().filter(|&&x| x != 1).map(u64::to_string).collect();
    format!("({})", nontrivial.join(", "))
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn analyze(scenario: &Scenario, settings: &RunSettings, format: Format) -> Result<String> {
    let (spec, emb) = groups(scenario)?;
    let d = ex_efg_decide(&spec, &emb)?;
    let residue_degree = scenario.extension.as_ref().map_or(1, |x| x.residue_degree);
    let mut out = String::new();
    let brute = vg_initial_index_bruteforce(&spec, &emb, settings.box_radius)?;
    let fg = vg_fg_module_test(&spec, &emb, settings.box_radius)?;
    let DecisionReport {
        e,
        epsilon,
        invariant_factors,
        efg,
        defect,
        structure,
    } = d;
    match format {
        Format::Text => {
            writeln!(out, "e={e} ε={epsilon} efg={} factors={}", yes(efg), factors_text(&invariant_factors)).unwrap();
            writeln!(out, "f={residue_degree} defect={defect}").unwrap();
            writeln!(out, "box ε={brute} (radius {})", settings.box_radius).unwrap();
            if fg.is_fg {
                let reps: Vec<String> = fg.representatives.iter().map(ToString::to_string).collect();
                writeln!(out, "fg-module=yes generators={}", reps.join(" ")).unwrap();
            } else {
                let w = fg.witness.map(|w| w.to_string()).unwrap_or_default();
                writeln!(out, "fg-module=no witness={w}").unwrap();
            }
            if let Some(s) = structure {
                writeln!(
                    out,
                    "structure cyclic={} first-level-rank={} first-level-index={} holds={}",
                    yes(s.factors_cyclic),
                    s.first_level_rank,
                    s.first_level_index,
                    yes(s.holds)
                )
                .unwrap();
            }
        }
        Format::Machine => {
            let f: Vec<String> = invariant_factors.iter().map(u64::to_string).collect();
            writeln!(out, "e={e}\nepsilon={epsilon}\nefg={}\nfactors={}", yes(efg), f.join(",")).unwrap();
            writeln!(out, "f={residue_degree}\ndefect={defect}\nbox_epsilon={brute}\nfg_module={}", yes(fg.is_fg)).unwrap();
            if let Some(s) = structure {
                writeln!(out, "structure_holds={}", yes(s.holds)).unwrap();
            }
        }
    }
    Ok(out)
}

fn normalize(scenario: &Scenario, config: &RunConfig) -> Result<String> {
    let ext = scenario
        .extension
        .as_ref()
        .ok_or_else(|| Error::precondition("normalize needs an [extension]"))?;
    let out_n = ex_normalize(ext)?;
    let mut out = String::new();
    let matrix = serde_json::to_string(&out_n.ext.c).expect("integer matrix serializes");
    match config.format {
        Format::Text => {
            writeln!(out, "C = {matrix}").unwrap();
            for (i, word) in out_n.ext.units.iter().enumerate() {
                if !word.is_empty() {
                    let m = crate::ring_state::Monomial {
                        unit_word: word.clone(),
                        ..crate::ring_state::Monomial::one()
                    };
                    writeln!(out, "unit.{} = {m}", i + 1).unwrap();
                }
            }
            if let Some((r, v)) = &out_n.shift {
                writeln!(out, "shift r={r:?} v={v}").unwrap();
            }
            writeln!(out, "steps = {}", out_n.steps.len()).unwrap();
            if config.trace {
                for (i, (side, rec)) in out_n.steps.iter().enumerate() {
                    write!(out, "step {} [{side:?}] {}", i + 1, rec.emit()).unwrap();
                }
            }
            writeln!(out, "R:").unwrap();
            out.push_str(&out_n.ext.r.summary());
            writeln!(out, "S:").unwrap();
            out.push_str(&out_n.ext.s.summary());
        }
        Format::Machine => {
            writeln!(out, "matrix={matrix}").unwrap();
            writeln!(out, "normal={}", yes(out_n.ext.is_normal_shape())).unwrap();
            writeln!(out, "r_steps={}", out_n.log(Side::R).len()).unwrap();
            writeln!(out, "s_steps={}", out_n.log(Side::S).len()).unwrap();
        }
    }
    Ok(out)
}

fn divide(
    scenario: &Scenario,
    m1: &crate::ring_state::Monomial,
    m2: &crate::ring_state::Monomial,
    settings: &RunSettings,
    config: &RunConfig,
) -> Result<String> {
    let r = scenario.r.as_ref().ok_or_else(|| Error::precondition("divide needs [ring R]"))?;
    let d = pe_monomial_divide(r, m1, m2, settings.max_steps)?;
    let mut out = String::new();
    match config.format {
        Format::Text => {
            writeln!(out, "{m1} divides {m2} after {} steps", d.log.len()).unwrap();
            writeln!(out, "M1' = {}\nM2' = {}\nwitness = {}", d.m1, d.m2, d.witness).unwrap();
            if config.trace {
                for (i, rec) in d.log.iter().enumerate() {
                    write!(out, "step {} {}", i + 1, rec.emit()).unwrap();
                }
            }
            out.push_str(&d.state.summary());
        }
        Format::Machine => {
            writeln!(out, "steps={}\nwitness={}", d.log.len(), d.witness).unwrap();
        }
    }
    Ok(out)
}

fn certify(
    scenario: &Scenario,
    g: &crate::ring_state::Monomial,
    h: &crate::ring_state::Monomial,
    settings: &RunSettings,
    config: &RunConfig,
) -> Result<String> {
    let ext = scenario
        .extension
        .as_ref()
        .ok_or_else(|| Error::precondition("certify needs an [extension]"))?;
    let outcome = ex_certify_division(ext, g, h, settings.max_steps)?;
    let transcript = Transcript::from_outcome(&scenario.digest(), settings, g, h, &outcome);
    transcript.replay(ext)?;
    Ok(match config.format {
        Format::Text => transcript.emit(),
        Format::Machine => format!(
            "e={}\nepsilon={}\nsteps={}\nwitness={}\nunit_certificate={}\n",
            transcript.e,
            transcript.epsilon,
            transcript.steps.len(),
            transcript.witness,
            yes(transcript.unit_certificate)
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::io_parse;

    #[test]
    fn analyze_cyclic_index_three() {
        let sc = io_parse("[group]\nranks = 1\ngenerators = (1/3)\nembedding = [[3]]\n").unwrap();
        let out = io_run(&sc, Command::Analyze, &RunConfig::default()).unwrap();
        assert!(out.starts_with("e=3 ε=3 efg=yes factors=(3)\n"), "{out}");
        assert!(out.contains("defect=1"));
        assert!(out.contains("box ε=3"));
        assert!(out.contains("holds=yes"));
    }

    #[test]
    fn divide_respects_step_cap() {
        let sc = io_parse("[ring R]\nranks = 2\nx1 @1 = (1)\nx2 @1 = (sqrt(2))\n\n[query]\ndivide x2^3 ; x1^5 max_steps=1\n").unwrap();
        let err = io_run(&sc, Command::Divide, &RunConfig::default()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn missing_query_is_a_precondition() {
        let sc = io_parse("[ring R]\nranks = 1\nx1 @1 = (1)\n").unwrap();
        let err = io_run(&sc, Command::Divide, &RunConfig::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
