//! Random programs and the instrumentation properties checked on them.
#![allow(dead_code)]

use ghostline::instrument::{
    applicable_points, apply_selection, project_counterexample, project_steps, InstrumentationOperator, Selection,
};
use ghostline::interp::{eval_bool, initial_states, replays, run_traced, ArrayDomain, Bounds, Domain, ExecutionResult, Value};
use ghostline::lang::{load, Program};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub const INTS: [&str; 5] = ["i", "j", "x", "y", "s"];
const PREDICATES: [&str; 2] = ["λ(v, k).(v >= k)", "λ(v, k).(v == 0)"];

pub struct Gen<'a> {
    rng: &'a mut StdRng,
    ints: Vec<&'static str>,
    loops_left: usize,
    /// Whether an array and a Boolean are declared.
    array: bool,
    boolean: bool,
}

impl<'a> Gen<'a> {
    pub fn new(rng: &'a mut StdRng, max_loops: usize) -> Gen<'a> {
        let n = rng.gen_range(3..=4);
        let ints = INTS[..n].to_vec();
        let array = rng.gen_bool(0.8);
        let boolean = array && rng.gen_bool(0.5);
        Gen {
            rng,
            ints,
            loops_left: max_loops,
            array,
            boolean,
        }
    }

    fn var(&mut self) -> &'static str {
        self.ints.choose(self.rng).copied().expect("some int")
    }

    fn lit(&mut self) -> i64 {
        self.rng.gen_range(-2..=3)
    }

    fn atom(&mut self) -> String {
        if self.rng.gen_bool(0.6) {
            self.var().to_string()
        } else {
            self.lit().to_string()
        }
    }

    fn linear(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => self.atom(),
            1 => format!("{} + {}", self.atom(), self.atom()),
            2 => format!("{} - {}", self.atom(), self.atom()),
            _ => format!("{} + {}", self.var(), self.lit()),
        }
    }

    fn cond(&mut self) -> String {
        if self.boolean && self.rng.gen_bool(0.2) {
            return if self.rng.gen_bool(0.5) { "b".into() } else { "!b".into() };
        }
        let op = *["<", "<=", "==", "!=", ">=", ">"].choose(self.rng).unwrap();
        format!("{} {op} {}", self.linear(), self.linear())
    }

    fn assignment(&mut self) -> String {
        let v = self.var();
        let k = if self.array { 12 } else { 6 };
        match self.rng.gen_range(0..k) {
            0 => format!("{v} = {};", self.lit()),
            1 => format!("{v} = {v} + {};", self.lit()),
            2 => format!("{v} = {} * {v};", self.lit()),
            3 => {
                let w = self.var();
                format!("{v} = {w} * {w};")
            }
            4 | 5 => format!("{v} = {};", self.linear()),
            6 => format!("{v} = select(a, {});", self.atom()),
            7 => format!("a = store(a, {}, {});", self.atom(), self.atom()),
            8 => format!("a = store(a, {}, {});", self.var(), self.atom()),
            9 => {
                let h = *["\\sum", "\\max", "\\min"].choose(self.rng).unwrap();
                format!("{v} = {h}(a, {}, {});", self.atom(), self.atom())
            }
            10 if self.boolean => {
                let q = *["forall", "exists"].choose(self.rng).unwrap();
                let p = *PREDICATES.choose(self.rng).unwrap();
                format!("b = {q}(a, {}, {}, {p});", self.atom(), self.atom())
            }
            _ => format!("{v} = select(a, {});", self.var()),
        }
    }

    fn stmt(&mut self, depth: usize, out: &mut String) {
        let roll = self.rng.gen_range(0..10);
        match roll {
            0 => out.push_str(&format!("assert({});\n", self.cond())),
            2 if depth < 2 => {
                out.push_str(&format!("if ({}) {{\n", self.cond()));
                self.block(depth + 1, 2, out);
                if self.rng.gen_bool(0.5) {
                    out.push_str("} else {\n");
                    self.block(depth + 1, 2, out);
                }
                out.push_str("}\n");
            }
            3 if depth < 2 && self.loops_left > 0 => {
                self.loops_left -= 1;
                let c = self.var();
                let bound = self.atom();
                out.push_str(&format!("while ({c} < {bound}) {{\n"));
                self.block(depth + 1, 3, out);
                out.push_str(&format!("{c} = {c} + 1;\n}}\n"));
            }
            4 if self.rng.gen_bool(0.3) => out.push_str(&format!("assume({});\n", self.cond())),
            _ => {
                out.push_str(&self.assignment());
                out.push('\n');
            }
        }
    }

    fn block(&mut self, depth: usize, max: usize, out: &mut String) {
        for _ in 0..self.rng.gen_range(1..=max) {
            self.stmt(depth, out);
        }
    }

    /// Source text of a whole program.
    pub fn source(&mut self) -> String {
        let mut out = String::new();
        let inputs = self.rng.gen_range(1..=2);
        for (k, v) in self.ints.clone().into_iter().enumerate() {
            if k < inputs {
                out.push_str(&format!("Int {v} = nondet;\n"));
            } else {
                out.push_str(&format!("Int {v};\n"));
            }
        }
        if self.array {
            out.push_str("Array Int a = nondet;\n");
        }
        if self.boolean {
            out.push_str("Bool b;\n");
        }
        let n = self.rng.gen_range(3..=8);
        for _ in 0..n {
            self.stmt(0, &mut out);
        }
        if self.rng.gen_bool(0.5) {
            out.push_str(&format!("assert({});\n", self.cond()));
        }
        out
    }
}

/// A random normalized program with at most `max_loops` loops.
pub fn random_program(rng: &mut StdRng, max_loops: usize) -> (String, Program) {
    let src = Gen::new(rng, max_loops).source();
    let p = load(&src).unwrap_or_else(|e| panic!("generated program does not load: {e}\n{src}")).program;
    (src, p)
}

pub fn random_selection(rng: &mut StdRng, p: &Program, ops: &[InstrumentationOperator]) -> Selection {
    let q = applicable_points(p, ops);
    let mut r = Selection::none(&q);
    for (pt, rules) in &q {
        if rng.gen_bool(0.6) {
            r = r.with(*pt, rules.choose(rng).unwrap());
        }
    }
    r
}

/// Integers in [-3, 3]; integer arrays with default 0 and at most two
/// overrides at indices 0 and 1.
pub fn small_bounds() -> Bounds {
    Bounds {
        int: Domain::Ints(-3, 3),
        array: ArrayDomain {
            defaults: vec![Value::int(0)],
            indices: (0, 1),
            elems: (-3..=3).map(Value::int).collect(),
            max_overrides: 2,
        },
        vars: Default::default(),
    }
}

pub const FUEL: u64 = 40;

/// Checks soundness, weak completeness, transparency and invariant
/// preservation of `P_r` against `p` on every input of `bounds`. Returns
/// the number of inputs checked.
pub fn check_instrumentation(
    p: &Program,
    ops: &[InstrumentationOperator],
    r: &Selection,
    bounds: &Bounds,
) -> Result<usize, String> {
    let inst = apply_selection(p, ops, r).map_err(|e| format!("apply: {e}"))?;
    let init = ops.iter().fold(ghostline::interp::State::new(), |mut s, op| {
        for g in &op.ghosts {
            s.set(&g.name, g.init.clone());
        }
        s
    });
    let mut n = 0;
    for s0 in initial_states(p, bounds) {
        n += 1;
        let (rp, steps_p) = run_traced(p, &s0, FUEL);
        let mut si = s0.clone();
        for (k, v) in &init.0 {
            si.set(k, v.clone());
        }
        let (ri, steps_i) = run_traced(&inst.program, &si, FUEL);
        let ctx = || format!("input {s0}\nselection {}\n{}", r, ghostline::lang::print(&inst.program));
        if rp.is_failed() && !ri.is_failed() {
            return Err(format!("soundness: P fails but P_r does not\n{}", ctx()));
        }
        if let ExecutionResult::Failed(cex) = &ri {
            if inst.is_original(cex.failing) {
                let proj = project_counterexample(cex, &inst).map_err(|e| e.to_string())?;
                if !replays(p, &proj) {
                    return Err(format!("weak completeness: projected trace does not replay\n{}", ctx()));
                }
            }
        }
        if !ri.is_failed() {
            let proj = project_steps(&steps_i, &inst);
            if proj != steps_p || ri.failing().is_some() != rp.failing().is_some() {
                return Err(format!("transparency: traces differ\n{}", ctx()));
            }
        }
        for st in &steps_i {
            if inst.origin(st.label).is_none() || !(inst.is_original(st.label) || inst.ins.values().any(|l| *l == st.label)) {
                continue;
            }
            for op in ops {
                if eval_bool(&op.invariant, &st.state) != Ok(true) {
                    return Err(format!("invariant of {} broken at {}\n{}", op.name, st.label, ctx()));
                }
            }
        }
    }
    Ok(n)
}

/// A program from one of a few loop families, with a randomly chosen
/// bound and a postcondition that is either right or slightly off.
pub fn family_program(rng: &mut StdRng) -> String {
    let n = if rng.gen_bool(0.5) {
        "Int N = nondet;".to_string()
    } else {
        format!("Int N = {};", rng.gen_range(1..=4))
    };
    let wrong = rng.gen_bool(0.4);
    let off = if wrong { *[" + 1", " - 1"].choose(rng).unwrap() } else { "" };
    let body = match rng.gen_range(0..6) {
        0 => format!(
            "Int i = 0; Int s = 0; Int NN;\nassume(N > 0);\n\
             while (i < N) {{ i = i + 1; s = s + i; }}\n\
             NN = N * N;\nassert(2 * s == NN + N{off});"
        ),
        1 => format!(
            "Array Int a = nondet; Int i = 0; Int s = 0; Int x; Int r;\nassume(N > 0);\n\
             while (i < N) {{ x = select(a, i); s = s + x; i = i + 1; }}\n\
             r = \\sum(a, 0, N);\nassert(r == s{off});"
        ),
        2 => {
            let (h, cmp) = if rng.gen_bool(0.5) { ("\\max", ">") } else { ("\\min", "<") };
            format!(
                "Array Int a = nondet; Int i = 1; Int m; Int x; Int r;\nassume(N > 0);\n\
                 x = select(a, 0); m = x;\n\
                 while (i < N) {{ x = select(a, i); if (x {cmp} m) {{ m = x; }} i = i + 1; }}\n\
                 r = {h}(a, 0, N);\nassert(r == m{off});"
            )
        }
        3 => {
            let v = if wrong { "i + 1" } else { "i" };
            format!(
                "Array Int a = const(0, N); Int i = 0; Bool b;\nassume(N > 0);\n\
                 while (i < N) {{ a = store(a, i, {v}); i = i + 1; }}\n\
                 b = forall(a, 0, N, λ(x, j).(x == j));\nassert(b);"
            )
        }
        4 => format!(
            "Int i = 0; Int s = 0; Int sq;\nassume(N >= 0);\n\
             while (i < N) {{ s = s + 2; i = i + 1; }}\n\
             sq = s * s;\nassert(sq == 4 * N * N{off});"
        ),
        _ => format!(
            "Array Int b = nondet; Array Int a = const(0, N); Int i = 0; Int x; Int r;\nassume(N > 0);\n\
             while (i < N) {{ x = select(b, i); if (x < 0) {{ x = 0 - x; }} a = store(a, i, x); i = i + 1; }}\n\
             r = \\sum(a, 0, N);\nassert(r >= 0{off});"
        ),
    };
    format!("{n}\n{body}\n")
}
