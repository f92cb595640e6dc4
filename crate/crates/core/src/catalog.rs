//! Bundled example instances with the result each is expected to produce.

use crate::error::{Error, Result};
use crate::io::{parse_input, Input};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    /// How the expected result was obtained independently of this crate.
    pub oracle: &'static str,
    pub expected: &'static str,
    /// The instance as a JSON document in the input format.
    pub source: &'static str,
}

impl CatalogEntry {
    pub fn parse(&self) -> Result<Input> {
        parse_input(self.source)
    }
}

const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "cournot",
        summary: "Two-firm Cournot market: demand D(Q) = 10 - Q, costs q_i^2, the market sets p = D(Q).",
        oracle: "calculus: firm i maximizes (10 - q_i - q_j) q_i - q_i^2, so 10 = 4 q_i + q_j and \
                 q = (2, 2), p = 6; the joint problem maximizes 10 Q - Q^2 - q_1^2 - q_2^2 with \
                 continuous optimum q_i = 5/3 and grid value 16.625",
        expected: "enumerate --check e2: exactly one point, x = (2, 2), p = 6; solve: surrogate \
                   value 16.625, tied between (1.5, 1.75), (1.75, 1.5) and (1.75, 1.75), returns \
                   the lowest grid index x = (1.5, 1.75), p = 6.75, certified",
        source: include_str!("../examples_data/cournot.json"),
    },
    CatalogEntry {
        name: "competitive-market",
        summary: "Price-taking firms with costs 4 q_i^2 facing p = 20 - q_1 - q_2.",
        oracle: "calculus: a price taker sets q_i = p / 8, and p = 20 - 2 q gives q = (2, 2), p = 16; \
                 the best-response map q -> (20 - 2q) / 8 contracts with slope -1/4",
        expected: "solve: x = (2, 2), p = 16, certified; verify: candidate certified",
        source: include_str!("../examples_data/competitive_market.json"),
    },
    CatalogEntry {
        name: "e1-shared-price",
        summary: "Two players share h = p (x1 + x2); the price player tracks p = 6 - x1 - x2.",
        oracle: "calculus: with p = 6 - S the surrogate is (6 - S) S - x1^2 - x2^2, maximized at \
                 x = (1, 1) with p = 4 and value 6; each deviation payoff -2y^2 + 4y + 5 peaks at y = 1",
        expected: "solve: x = (1, 1), p = 4, surrogate value 6, certified",
        source: include_str!("../examples_data/e1_shared_price.json"),
    },
    CatalogEntry {
        name: "e2-tracking-price",
        summary: "Own-action revenue p x_i with a price player minimizing |p - (x1 + x2)|.",
        oracle: "convexity: the surrogate S^2 - x1^2 - x2^2 is convex on [0, 2]^2, so the maximum \
                 is at a vertex; (2, 2) gives 8 against 0 at (2, 0)",
        expected: "solve: x = (2, 2), p = 4, surrogate value 8, certified",
        source: include_str!("../examples_data/e2_tracking_price.json"),
    },
    CatalogEntry {
        name: "tm-coupled",
        summary: "Price-taking game with coupled price set M(x) = [0, x1], f = -p, g = -x1.",
        oracle: "enumeration: at x = 3, p = 3 the player gains 3 by moving to 0, which would push \
                 p out of M(x); restricted to moves keeping p feasible, no gain exists",
        expected: "verify --formulation tm: certified; verify --check t: refuted with witness x1 = 0; \
                   solve: x = 0, p = 0, certified",
        source: include_str!("../examples_data/tm_coupled.json"),
    },
    CatalogEntry {
        name: "gep-toy",
        summary: "Two companies, two periods. Game mapping: decision x_i = (x_c, x_o_t, e_t, r_t); \
                  shared revenue h = sum_t P_t x_o_t + MCP_t e_t + RTP_t r_t; own cost \
                  g_i = -(C_i(x_c) + sum_t F_i(e_t + r_t)); price player = ISO with reserve, \
                  energy and real-time price curves.",
        oracle: "serialization: parse, serialize and parse again give the same scenario; the sum of \
                 own costs passes the potential identity on 1000 samples",
        expected: "potential-check: holds with violation 0; solve --formulation t1: best responses \
                   keep jumping across the scarcity price and stop after 200 sweeps, refuted",
        source: include_str!("../examples_data/gep_toy.json"),
    },
    CatalogEntry {
        name: "gep-withholding",
        summary: "One company facing load 10 with C = 2.1 q^2 and F = q + 0.1 q^2. Below the load \
                  the energy price is the scarcity price 11 F'(e).",
        oracle: "calculus: a price taker sets 11 + 2.2 e = 1 + 4.4 e, e = 50/11 = 4.55; anticipating \
                 the price, profit is 10 e below the load and negative at it, so e = 9.75 on the grid",
        expected: "solve --formulation t1: e = 4.5, certified; solve --formulation e2: e = 9.75, certified",
        source: include_str!("../examples_data/gep_withholding.json"),
    },
];

pub fn catalog() -> &'static [CatalogEntry] {
    ENTRIES
}

pub fn example(name: &str) -> Result<&'static CatalogEntry> {
    ENTRIES.iter().find(|e| e.name == name).ok_or_else(|| {
        let names: Vec<&str> = ENTRIES.iter().map(|e| e.name).collect();
        Error::Usage(format!("no bundled example `{name}`; available: {}", names.join(", ")))
    })
}
