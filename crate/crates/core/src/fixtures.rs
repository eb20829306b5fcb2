//! Generators: the adversarial tree family, the graph-coloring gadget,
//! and seeded random instances for the differential test corpora.

use std::collections::BTreeSet;

use crate::model::{Database, Egd, Value};
use crate::query::{parse_egds, parse_query, Formula};

/// SplitMix64: tiny, fully deterministic; seeds reproduce forever.
#[derive(Debug, Clone)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    pub fn chance(&mut self, percent: usize) -> bool {
        self.below(100) < percent
    }

    pub fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.below(xs.len())]
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum FixtureError {
    #[error("graph has {0} nodes, above the cap of {1}")]
    GraphTooLarge(usize, usize),
    #[error("tree depth must be at least 1")]
    DepthZero,
}

/// The pair of tree databases distinguishing Datalog from FO rewritings:
/// `E` is a disjoint union of two balanced binary trees of all-null nodes,
/// the first attribute of `E` is a key, and the Boolean query asks whether
/// the `A` leaf equals the `B` leaf. Under the key every consistent
/// valuation collapses each tree to a chain, so certainty holds exactly
/// when `A` and `B` mark leaves of the same tree.
#[derive(Debug, Clone)]
pub struct TreePair {
    /// `A` marks a leaf of the first tree, `B` a leaf of the second.
    pub separated: Database,
    /// `A` and `B` mark leaves of the first tree under different children
    /// of its root.
    pub joined: Database,
    pub query: Formula,
    pub sigma: Vec<Egd>,
}

pub fn gen_tree_pair(depth: usize) -> Result<TreePair, FixtureError> {
    if depth == 0 {
        return Err(FixtureError::DepthZero);
    }
    let node = |tree: usize, i: usize| Value::null(format!("t{tree}n{i}"));
    let mut base = Database::new();
    for tree in [1, 2] {
        // heap layout: node i has children 2i+1 and 2i+2
        let internal = (1usize << depth) - 1;
        for i in 0..internal {
            base.insert_fact("E", vec![node(tree, i), node(tree, 2 * i + 1)])
                .unwrap();
            base.insert_fact("E", vec![node(tree, i), node(tree, 2 * i + 2)])
                .unwrap();
        }
    }
    let leftmost_leaf = (1usize << depth) - 1;
    let rightmost_leaf = (1usize << (depth + 1)) - 2;

    let mut separated = base.clone();
    separated
        .insert_fact("A", vec![node(1, leftmost_leaf)])
        .unwrap();
    separated
        .insert_fact("B", vec![node(2, leftmost_leaf)])
        .unwrap();

    let mut joined = base;
    joined.insert_fact("A", vec![node(1, leftmost_leaf)]).unwrap();
    joined.insert_fact("B", vec![node(1, rightmost_leaf)]).unwrap();

    Ok(TreePair {
        separated,
        joined,
        query: parse_query("exists x (A(x) & B(x))").unwrap(),
        sigma: parse_egds("E(x, y) & E(x, z) -> y = z .").unwrap(),
    })
}

/// A simple undirected graph over `u32` node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    nodes: BTreeSet<u32>,
    edges: BTreeSet<(u32, u32)>,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    pub fn add_node(&mut self, n: u32) {
        self.nodes.insert(n);
    }

    pub fn add_edge(&mut self, u: u32, v: u32) {
        assert_ne!(u, v, "simple graphs have no loops");
        self.nodes.insert(u);
        self.nodes.insert(v);
        self.edges.insert((u.min(v), u.max(v)));
    }

    pub fn nodes(&self) -> &BTreeSet<u32> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(u32, u32)> {
        &self.edges
    }

    /// Parses edge-list text: `u v` per line adds an edge, a single `u`
    /// declares an isolated node, `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Graph, String> {
        let mut g = Graph::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<u32>()
                    .map_err(|_| format!("line {}: bad node id `{s}`", lineno + 1))
            };
            match parts.as_slice() {
                [u] => g.add_node(parse(u)?),
                [u, v] => {
                    let (u, v) = (parse(u)?, parse(v)?);
                    if u == v {
                        return Err(format!("line {}: loops are not allowed", lineno + 1));
                    }
                    g.add_edge(u, v);
                }
                _ => return Err(format!("line {}: expected `u` or `u v`", lineno + 1)),
            }
        }
        Ok(g)
    }
}

/// Exact chromatic number by exhaustive search over colorings.
pub fn chromatic_number(g: &Graph) -> usize {
    let nodes: Vec<u32> = g.nodes.iter().copied().collect();
    if nodes.is_empty() {
        return 0;
    }
    'k: for k in 1..=nodes.len() {
        let mut coloring = vec![0usize; nodes.len()];
        loop {
            let proper = g.edges.iter().all(|(u, v)| {
                let iu = nodes.binary_search(u).unwrap();
                let iv = nodes.binary_search(v).unwrap();
                coloring[iu] != coloring[iv]
            });
            if proper {
                return k;
            }
            // next assignment in base k
            let mut i = 0;
            loop {
                if i == coloring.len() {
                    continue 'k;
                }
                coloring[i] += 1;
                if coloring[i] == k {
                    coloring[i] = 0;
                    i += 1;
                } else {
                    break;
                }
            }
        }
    }
    unreachable!("every graph is colorable with |nodes| colors")
}

const COLORING_NODE_CAP: usize = 5;

/// The coloring gadget: one null per node, `E` holds both orientations of
/// each edge, `C` holds one color constant per node, `O` the odd-indexed
/// colors, and `L` the linear order on colors. The companion query's best
/// answers encode the parity of the chromatic number.
pub fn gen_coloring(g: &Graph) -> Result<(Database, Formula), FixtureError> {
    let n = g.nodes.len();
    if n > COLORING_NODE_CAP {
        return Err(FixtureError::GraphTooLarge(n, COLORING_NODE_CAP));
    }
    let mut d = Database::new();
    d.declare_relation("E", 2).unwrap();
    d.declare_relation("C", 1).unwrap();
    d.declare_relation("O", 1).unwrap();
    d.declare_relation("L", 2).unwrap();
    let null_of = |v: u32| Value::null(format!("n{v}"));
    let color = |i: usize| Value::str(format!("c{i}"));
    for (u, v) in &g.edges {
        d.insert_fact("E", vec![null_of(*u), null_of(*v)]).unwrap();
        d.insert_fact("E", vec![null_of(*v), null_of(*u)]).unwrap();
    }
    for i in 1..=n {
        d.insert_fact("C", vec![color(i)]).unwrap();
        if i % 2 == 1 {
            d.insert_fact("O", vec![color(i)]).unwrap();
        }
        for j in i..=n {
            d.insert_fact("L", vec![color(i), color(j)]).unwrap();
        }
    }

    // phi(x): x is a color, every node's color is at most x, every color
    // up to x is used, and no edge is monochromatic; the bound variables
    // p, q keep clear of both arguments phi is instantiated at
    let phi = |x: &str| {
        parse_query(&format!(
            "C({x}) & forall p q (!(E(p, q)) | L(p, {x})) \
             & forall p (!(L(p, {x})) | exists q (E(p, q))) \
             & !(exists p (E(p, p)))"
        ))
        .unwrap()
    };
    let query = Formula::and(vec![
        parse_query("C(x)").unwrap(),
        Formula::or(vec![
            phi("x"),
            Formula::exists(
                vec!["y".into()],
                Formula::and(vec![parse_query("O(y) & L(x, y)").unwrap(), phi("y")]),
            ),
        ]),
    ]);
    Ok((d, query))
}

/// Parameters for the seeded random-instance generator.
#[derive(Debug, Clone)]
pub struct RandomParams {
    pub max_facts: usize,
    pub max_consts: usize,
    pub max_nulls: usize,
    pub schema: Vec<(String, usize)>,
    pub query_pool: Vec<Formula>,
    pub egd_pool: Vec<Vec<Egd>>,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            max_facts: 6,
            max_consts: 4,
            max_nulls: 3,
            schema: corpus_schema(),
            query_pool: ucq_pool(),
            egd_pool: fd_pool(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub db: Database,
    pub query: Formula,
    pub egds: Vec<Egd>,
}

/// Reproducible from the seed. Instances are stratified to share nulls
/// across tuples and to overlap on first columns, which is what triggers
/// EGDs.
pub fn gen_random(seed: u64, params: &RandomParams) -> RandomInstance {
    let mut rng = Rng::new(seed);
    let n_consts = 1 + rng.below(params.max_consts);
    let n_nulls = rng.below(params.max_nulls + 1);
    let consts: Vec<Value> = (1..=n_consts as i64).map(Value::int).collect();
    let nulls: Vec<Value> = (1..=n_nulls).map(|i| Value::null(format!("n{i}"))).collect();

    let mut db = Database::new();
    for (rel, arity) in &params.schema {
        db.declare_relation(rel, *arity).unwrap();
    }
    let n_facts = 1 + rng.below(params.max_facts);
    let mut used: Vec<Value> = Vec::new();
    for _ in 0..n_facts {
        let (rel, arity) = rng.pick(&params.schema).clone();
        let mut tuple = Vec::with_capacity(arity);
        for pos in 0..arity {
            // bias the first column toward an existing first-column value
            let v = if pos == 0 && rng.chance(40) {
                if let Some(existing) = db
                    .relation(&rel)
                    .and_then(|facts| facts.iter().nth(rng.below(facts.len().max(1))))
                {
                    existing[0].clone()
                } else {
                    fresh_value(&mut rng, &consts, &nulls, &used)
                }
            } else if !used.is_empty() && rng.chance(50) {
                rng.pick(&used).clone()
            } else {
                fresh_value(&mut rng, &consts, &nulls, &used)
            };
            if !used.contains(&v) {
                used.push(v.clone());
            }
            tuple.push(v);
        }
        db.insert_fact(&rel, tuple).unwrap();
    }
    let query = rng.pick(&params.query_pool).clone();
    let egds = rng.pick(&params.egd_pool).clone();
    RandomInstance { db, query, egds }
}

fn fresh_value(rng: &mut Rng, consts: &[Value], nulls: &[Value], _used: &[Value]) -> Value {
    if !nulls.is_empty() && rng.chance(45) {
        rng.pick(nulls).clone()
    } else {
        rng.pick(consts).clone()
    }
}

/// The shared schema of the random corpora.
pub fn corpus_schema() -> Vec<(String, usize)> {
    vec![("R".into(), 2), ("S".into(), 2), ("U".into(), 1)]
}

fn queries(texts: &[&str]) -> Vec<Formula> {
    texts.iter().map(|t| parse_query(t).unwrap()).collect()
}

/// Ten UCQs over the corpus schema.
pub fn ucq_pool() -> Vec<Formula> {
    queries(&[
        "R(x, y)",
        "exists y (R(x, y))",
        "exists y (R(y, x))",
        "exists z (R(x, z) & S(z, y))",
        "R(x, y) | S(x, y)",
        "exists y (R(x, y) & R(y, x))",
        "U(x)",
        "exists x y (R(x, y) & S(x, y))",
        "R(x, 1)",
        "R(x, y) | U(x)",
    ])
}

/// Eight BCCQs over the corpus schema.
pub fn bccq_pool() -> Vec<Formula> {
    queries(&[
        "R(x, y) - (R(x, y) & x = y)",
        "R(x, y) - S(x, y)",
        "exists y (R(x, y)) - U(x)",
        "(R(x, y) | S(x, y)) - (R(x, y) & S(x, y))",
        "U(x) & !(exists y (R(x, y) & y = 1))",
        "exists x y (R(x, y)) - (exists x (R(x, x)))",
        "R(x, y) & !(x = y)",
        "(exists y (R(x, y) & S(y, x))) - (U(x) & x = 2)",
    ])
}

/// Six UCQs for the best-answer corpus.
pub fn best_ucq_pool() -> Vec<Formula> {
    queries(&[
        "exists y (U(y) & R(y, x))",
        "R(x, y)",
        "R(x, y) | S(y, x)",
        "exists y (R(x, y)) | U(x)",
        "exists y z (R(x, y) & S(y, z))",
        "U(x) | exists y (R(x, y) & x = 1)",
    ])
}

fn egd_sets(texts: &[&str]) -> Vec<Vec<Egd>> {
    texts.iter().map(|t| parse_egds(t).unwrap()).collect()
}

/// Functional-dependency pools for the chase corpus.
pub fn fd_pool() -> Vec<Vec<Egd>> {
    egd_sets(&[
        "",
        "R(x, y) & R(x, z) -> y = z .",
        "S(x, y) & S(x, z) -> y = z .",
        "R(x, y) & R(x, z) -> y = z .\nS(x, y) & S(x, z) -> y = z .",
        "R(y, x) & R(z, x) -> y = z .",
    ])
}

/// General EGD pools for the rewriting corpus.
pub fn egd_pool() -> Vec<Vec<Egd>> {
    egd_sets(&[
        "",
        "R(x, y) & R(x, z) -> y = z .",
        "R(x, y) & R(x, z) -> y = z .\nS(x, y) & S(x, z) -> y = z .",
        "R(x, y) & S(x, z) -> y = z .",
        "U(x) & U(y) -> x = y .",
        "R(y, x) & R(z, x) -> y = z .\nS(x, y) & S(x, z) -> y = z .",
    ])
}
