//! Certificates as replayable transcripts.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::extension::{replay_steps, steps_log, CertifyOutcome, MonomialExtension, Side, Step};
use crate::perron::pe_reexpress;
use crate::ring_state::{rs_monomial_value, Monomial};

pub const TRANSCRIPT_VERSION: &str = "efg-transcript 1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSettings {
    pub max_steps: usize,
    pub box_radius: u32,
    pub precision_rounds: u32,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            max_steps: crate::perron::DEFAULT_STEP_CAP,
            box_radius: crate::value_groups::DEFAULT_BOX_RADIUS,
            precision_rounds: crate::exact_reals::DEFAULT_ROUNDS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Transcript {
    pub scenario_digest: String,
    pub settings: RunSettings,
    pub g: Monomial,
    pub h: Monomial,
    pub e: u64,
    pub epsilon: u64,
    pub steps: Vec<Step>,
    pub w1: Option<Monomial>,
    pub w2: Option<Monomial>,
    pub g_final: Monomial,
    pub h_final: Monomial,
    pub witness: Monomial,
    pub final_r: String,
    pub final_s: String,
    pub unit_certificate: bool,
}

impl Transcript {
    pub fn from_outcome(digest: &str, settings: &RunSettings, g: &Monomial, h: &Monomial, out: &CertifyOutcome) -> Self {
        Transcript {
            scenario_digest: digest.to_string(),
            settings: settings.clone(),
            g: g.clone(),
            h: h.clone(),
            e: out.e,
            epsilon: out.epsilon,
            steps: out.steps.clone(),
            w1: out.w1.clone(),
            w2: out.w2.clone(),
            g_final: out.g_final.clone(),
            h_final: out.h_final.clone(),
            witness: out.witness.clone(),
            final_r: out.final_ext.r.summary(),
            final_s: out.final_ext.s.summary(),
            unit_certificate: out.unit_certificate,
        }
    }

    pub fn decision(&self) -> String {
        let how = if self.unit_certificate { "by a unit" } else { "after blowing up" };
        format!("{} divides {} in the valuation ring ({how})", self.h, self.g)
    }

    pub fn emit(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# {TRANSCRIPT_VERSION}").unwrap();
        writeln!(out, "scenario-sha256 = {}", self.scenario_digest).unwrap();
        writeln!(
            out,
            "config = max_steps={} box={} precision_rounds={}",
            self.settings.max_steps, self.settings.box_radius, self.settings.precision_rounds
        )
        .unwrap();
        writeln!(out, "query = certify {} ; {}", self.g, self.h).unwrap();
        writeln!(out, "e = {} epsilon = {}", self.e, self.epsilon).unwrap();
        if let (Some(w1), Some(w2)) = (&self.w1, &self.w2) {
            writeln!(out, "W1 = {w1}").unwrap();
            writeln!(out, "W2 = {w2}").unwrap();
        }
        writeln!(out, "steps = {}", self.steps.len()).unwrap();
        for (i, (side, rec)) in self.steps.iter().enumerate() {
            write!(out, "step {} [{side:?}] {}", i + 1, rec.emit()).unwrap();
        }
        out.push_str("final R\n");
        for line in self.final_r.lines() {
            writeln!(out, "  {line}").unwrap();
        }
        out.push_str("final S\n");
        for line in self.final_s.lines() {
            writeln!(out, "  {line}").unwrap();
        }
        writeln!(out, "g' = {}", self.g_final).unwrap();
        writeln!(out, "h' = {}", self.h_final).unwrap();
        writeln!(out, "witness = {}", self.witness).unwrap();
        writeln!(out, "decision = {}", self.decision()).unwrap();
        out
    }

    /// Re-applies every recorded step to `ext`, recomputes the final rings,
    /// `g'`, `h'` and the witness, and checks that the emitted text is
    /// reproduced byte for byte.
    pub fn replay(&self, ext: &MonomialExtension) -> Result<()> {
        let (r, s) = replay_steps(ext, &self.steps)?;
        let log = steps_log(&self.steps, Side::S);
        let g_final = pe_reexpress(&log, &self.g)?;
        let h_final = pe_reexpress(&log, &self.h)?;
        let witness = g_final.div(&h_final);
        if !witness.is_nonnegative() {
            return Err(Error::precondition(format!("replayed quotient {witness} is not a monomial")));
        }
        let wg = rs_monomial_value(&ext.s, &self.g)?;
        let wh = rs_monomial_value(&ext.s, &self.h)?;
        if rs_monomial_value(&s, &witness)? != wg.sub(&wh) {
            return Err(Error::precondition("replayed quotient has the wrong value"));
        }
        let rebuilt = Transcript {
            g_final,
            h_final,
            witness,
            final_r: r.summary(),
            final_s: s.summary(),
            ..self.clone()
        };
        if rebuilt.emit() != self.emit() {
            return Err(Error::precondition("replay does not reproduce the transcript"));
        }
        Ok(())
    }
}
