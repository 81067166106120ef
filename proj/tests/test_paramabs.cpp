// Parameter abstraction: shape hypotheses screened with exact complaints,
// property guards conjoined onto transitions without changing ground safety,
// universal prefixes traded for frozen prophecy variables, the
// quantifier-free abstraction validated structurally and against concrete
// executions found by explicit search, and end-to-end candidate checks that
// prove real invariants while refusing to promote abstract counterexamples.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "qivc/engine/paramabs.hpp"
#include "qivc/system/parse.hpp"

using namespace qivc;
using namespace qivc::engine;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string corpus_path(const std::string& name) {
  return std::string(QIVC_CORPUS_DIR) + "/" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Term read_formula(sys::ArraySystem& s, const std::string& text) {
  SexprReader r(text);
  Sexpr e;
  REQUIRE(r.next(e));
  TermReader rd(*s.tm, s.env);
  return rd.read(e);
}

check::PdrResult ground_check(TermManager& tm, const sys::ArraySystem& s,
                              int n, check::PdrOptions opts = {}) {
  sys::GroundInstance g = sys::build_ground_instance(s, n);
  sys::PrimedVocab pv = sys::make_primed(tm, s);
  return check::pdr_check(check::make_qf_system(g, pv),
                          check::bundled_factory(tm), opts);
}

bool entails(TermManager& tm, const check::QfSystem& qf, Term from, Term to) {
  smt::BundledSolver sol(tm);
  qf.declare(sol);
  sol.assert_term(from);
  sol.assert_term(tm.mk_not(to));
  return sol.check_sat() == smt::Verdict::Unsat;
}

bool satisfiable(TermManager& tm, const check::QfSystem& qf,
                 const std::vector<Term>& fs) {
  smt::BundledSolver sol(tm);
  qf.declare(sol);
  for (Term f : fs) sol.assert_term(f);
  return sol.check_sat() == smt::Verdict::Sat;
}

// ---- explicit bakery executions ----

struct BState {
  std::vector<int> st, tk;  // st: 0 idle, 1 wait, 2 crit
  int nt = 1, ts = 1;
  bool operator<(const BState& o) const {
    return std::tie(st, tk, nt, ts) < std::tie(o.st, o.tk, o.nt, o.ts);
  }
};

std::vector<BState> bakery_succs(const BState& s) {
  std::vector<BState> out;
  for (size_t i = 0; i < s.st.size(); i++) {
    if (s.st[i] == 0) {  // take a ticket
      BState t = s;
      t.st[i] = 1;
      t.tk[i] = s.nt;
      t.nt++;
      out.push_back(t);
    }
    if (s.st[i] == 1 && s.tk[i] == s.ts) {  // enter when served
      BState t = s;
      t.st[i] = 2;
      out.push_back(t);
    }
    if (s.st[i] == 2) {  // leave and serve the next ticket
      BState t = s;
      t.st[i] = 0;
      t.tk[i] = 0;
      t.ts++;
      out.push_back(t);
    }
  }
  return out;
}

oracle::OStruct bakery_ostruct(const BState& s) {
  static const char* loc[] = {"idle", "wait", "crit"};
  oracle::OStruct m;
  m.universe = static_cast<int>(s.st.size());
  m.ctors = {"idle", "wait", "crit"};
  for (int v : s.st) m.arrays["state"].push_back(oracle::OVal::vc(loc[v]));
  for (int v : s.tk) m.arrays["ticket"].push_back(oracle::OVal::vq(v));
  m.scalars["next_ticket"] = oracle::OVal::vq(s.nt);
  m.scalars["to_serve"] = oracle::OVal::vq(s.ts);
  return m;
}

std::vector<Sexpr> trans_sexprs(const std::string& text) {
  SexprReader r(text);
  Sexpr e;
  std::vector<Sexpr> out;
  while (r.next(e))
    if (e.head_is("trans")) out.push_back(e[1]);
  return out;
}

// Shortest run to every state reachable within `depth` steps; every edge the
// hand-rolled successor function generates is validated against the parsed
// transition relation before it is trusted.
std::vector<std::vector<BState>> bakery_traces(int n, int depth,
                                               const std::vector<Sexpr>& rules) {
  BState init;
  init.st.assign(n, 0);
  init.tk.assign(n, 0);
  std::map<BState, int> id{{init, 0}};
  std::vector<BState> node{init};
  std::vector<int> parent{-1}, dist{0};
  std::deque<int> q{0};
  while (!q.empty()) {
    int c = q.front();
    q.pop_front();
    if (dist[c] == depth) continue;
    for (const BState& nx : bakery_succs(node[c])) {
      oracle::OStruct cur = bakery_ostruct(node[c]);
      oracle::OStruct suc = bakery_ostruct(nx);
      cur.next = &suc;
      bool edge = false;
      for (const Sexpr& r : rules) edge = edge || oracle::OracleEval(cur).truth(r);
      REQUIRE(edge);
      if (id.count(nx)) continue;
      int k = static_cast<int>(node.size());
      id.emplace(nx, k);
      node.push_back(nx);
      parent.push_back(c);
      dist.push_back(dist[c] + 1);
      q.push_back(k);
    }
  }
  std::vector<std::vector<BState>> traces;
  for (size_t v = 0; v < node.size(); v++) {
    std::vector<BState> tr;
    for (int c = static_cast<int>(v); c != -1; c = parent[c]) tr.push_back(node[c]);
    std::reverse(tr.begin(), tr.end());
    traces.push_back(std::move(tr));
  }
  return traces;
}

// Fixed-length unrolling of an abstract system with one vocabulary copy per
// step; `gap` abstract steps cover one concrete step.
struct Unroller {
  TermManager& tm;
  const AbsSystem& abs;
  int steps, gap;
  smt::BundledSolver sol;
  std::vector<TermMap> at;
  std::map<std::string, Term> byname;

  Unroller(TermManager& t, const AbsSystem& a, int concrete_steps, int g)
      : tm(t), abs(a), steps(concrete_steps * g), gap(g), sol(t) {
    const check::QfSystem& qf = abs.qf;
    if (qf.index_sort != 0) sol.declare_index_sort(tm.sort(qf.index_sort).name);
    for (SortId es : qf.enum_sorts) sol.declare_enum_sort(es);
    at.resize(steps + 1);
    for (int s = 0; s <= steps; s++)
      for (Term v : qf.vars) {
        Term c = tm.mk_const(tm.name_of(v) + "/" + std::to_string(s),
                             tm.sort_of(v));
        at[s].emplace(v, c);
        sol.register_const(c);
      }
    for (Term v : qf.vars) byname.emplace(tm.name_of(v), v);
    sol.assert_term(tm.substitute(qf.init, at[0]));
    for (int s = 0; s <= steps; s++)
      sol.assert_term(tm.substitute(qf.background, at[s]));
    for (int s = 0; s < steps; s++) {
      TermMap two = at[s];
      for (size_t i = 0; i < qf.vars.size(); i++)
        two.emplace(qf.primed[i], at[s + 1].at(qf.vars[i]));
      sol.assert_term(tm.substitute(qf.trans, two));
    }
  }

  // is there an abstract run matching the pinned observations step by step?
  bool covers(const std::vector<std::vector<std::pair<std::string, Term>>>& obs) {
    sol.push();
    for (size_t j = 0; j < obs.size(); j++)
      for (const auto& [name, val] : obs[j])
        sol.assert_term(tm.mk_eq(at[j * gap].at(byname.at(name)), val));
    bool sat = sol.check_sat() == smt::Verdict::Sat;
    sol.pop();
    return sat;
  }
};

// Array state at the two prophecy positions plus every scalar; the first two
// concrete indices play the prophecies, anything further is untracked.
std::vector<std::pair<std::string, Term>> bakery_pins(TermManager& tm,
                                                      SortId loc,
                                                      const BState& s) {
  static const char* name[] = {"idle", "wait", "crit"};
  return {{"state@p1", tm.mk_enum(loc, name[s.st[0]])},
          {"state@p2", tm.mk_enum(loc, name[s.st[1]])},
          {"ticket@p1", tm.mk_int(s.tk[0])},
          {"ticket@p2", tm.mk_int(s.tk[1])},
          {"next_ticket", tm.mk_int(s.nt)},
          {"to_serve", tm.mk_int(s.ts)}};
}

// concretely safe, but the enabling fact lives at untracked positions: the
// rule fires only on a raised trigger, and no trigger is ever raised
const char* coarse_text = R"((declare-index-sort P)
(declare-var flag (Array P Bool))
(declare-var trigger (Array P Bool))
(init (forall ((i P)) (and (not (select flag i)) (not (select trigger i)))))
(trans (exists ((i P) (k P))
  (and (not (= i k))
       (select trigger k)
       (select (next flag) i)
       (forall ((j P))
         (=> (not (= j i)) (= (select (next flag) j) (select flag j))))
       (forall ((j P))
         (= (select (next trigger) j) (select trigger j))))))
(prop (forall ((i P)) (not (select flag i)))))";

const char* stuck_text = R"((declare-index-sort P)
(declare-var x (Array P Bool))
(init (forall ((i P)) (not (select x i))))
(trans false)
(prop true))";

}  // namespace

TEST_CASE("shape hypotheses accept the corpus and name what they reject") {
  TermManager tm;

  SECTION("corpus systems satisfy the hypotheses") {
    for (const char* name :
         {"bakery.qivc", "bakery_broken.qivc", "mutex_simple.qivc",
          "bool_proto.qivc", "token_ring.qivc"}) {
      sys::ArraySystem s = sys::parse_system_file(tm, corpus_path(name));
      ShapeVerdict v = check_hypotheses(s);
      INFO(name << ": " << v.reason);
      REQUIRE(v.accepted);
    }
  }

  SECTION("an existential initial condition is rejected") {
    sys::ArraySystem s =
        sys::parse_system_file(tm, corpus_path("exists_token.qivc"));
    ShapeVerdict v = check_hypotheses(s);
    REQUIRE_FALSE(v.accepted);
    REQUIRE_THAT(v.reason, ContainsSubstring("initial"));
  }

  SECTION("an existential property is rejected") {
    sys::ArraySystem s = sys::parse_system(tm, std::string(stuck_text));
    s.prop = read_formula(s, "(exists ((i P)) (not (select x i)))");
    ShapeVerdict v = check_hypotheses(s);
    REQUIRE_FALSE(v.accepted);
    REQUIRE_THAT(v.reason, ContainsSubstring("property"));
  }

  SECTION("an existential under a universal names its disjunct") {
    sys::ArraySystem s = sys::parse_system(tm, std::string(stuck_text));
    s.trans.push_back(read_formula(
        s, "(forall ((i P)) (exists ((j P)) (= (select x i) (select x j))))"));
    ShapeVerdict v = check_hypotheses(s);
    REQUIRE_FALSE(v.accepted);
    REQUIRE_THAT(v.reason, ContainsSubstring("transition disjunct 2"));
  }
}

TEST_CASE("guard strengthening and prophecies preserve ground safety") {
  SECTION("the strengthened transitions carry the property conjunct") {
    TermManager tm;
    sys::ArraySystem s = sys::parse_system_file(tm, corpus_path("bakery.qivc"));
    sys::ArraySystem g = guard_strengthen(s);
    REQUIRE(g.trans.size() == s.trans.size());
    for (size_t k = 0; k < s.trans.size(); k++)
      REQUIRE(g.trans[k] == tm.mk_and(s.trans[k], s.prop));
  }

  SECTION("a safe instance stays safe through the whole pre-pipeline") {
    TermManager tm;
    sys::ArraySystem s =
        sys::parse_system_file(tm, corpus_path("mutex_simple.qivc"));
    REQUIRE(ground_check(tm, s, 2).kind == check::PdrResult::Kind::Safe);
    sys::ArraySystem g = guard_strengthen(s);
    REQUIRE(ground_check(tm, g, 2).kind == check::PdrResult::Kind::Safe);
    Prophecied pr = introduce_prophecies(g);
    REQUIRE(pr.prophecies.size() == 2);
    REQUIRE(ground_check(tm, pr.system, 2).kind ==
            check::PdrResult::Kind::Safe);
  }

  SECTION("an unsafe instance stays unsafe through the whole pre-pipeline") {
    TermManager tm;
    sys::ArraySystem s =
        sys::parse_system_file(tm, corpus_path("bakery_broken.qivc"));
    REQUIRE(ground_check(tm, s, 2).kind == check::PdrResult::Kind::Unsafe);
    sys::ArraySystem g = guard_strengthen(s);
    REQUIRE(ground_check(tm, g, 2).kind == check::PdrResult::Kind::Unsafe);
    Prophecied pr = introduce_prophecies(g);
    REQUIRE(ground_check(tm, pr.system, 2).kind ==
            check::PdrResult::Kind::Unsafe);
  }
}

TEST_CASE("prophecy introduction replaces the universal prefix") {
  TermManager tm;
  sys::ArraySystem s = sys::parse_system_file(tm, corpus_path("bakery.qivc"));

  SECTION("the property becomes one instantiation over fresh frozen variables") {
    Prophecied pr = introduce_prophecies(s);
    REQUIRE(pr.prophecies.size() == 2);
    REQUIRE(pr.system.vars.size() == s.vars.size() + 2);
    const sys::StateVar* p1 = pr.system.find("p1");
    const sys::StateVar* p2 = pr.system.find("p2");
    REQUIRE(p1 != nullptr);
    REQUIRE(p2 != nullptr);
    REQUIRE(p1->frozen);
    REQUIRE(p2->frozen);
    REQUIRE(tm.sort(tm.sort_of(p1->sym)).kind == SortKind::Index);
    REQUIRE_FALSE(contains_quantifier(tm, pr.system.prop));

    Term nnf = to_nnf(tm, s.prop);
    TermMap m{{tm.binder_var(nnf, 0), p1->sym}, {tm.binder_var(nnf, 1), p2->sym}};
    REQUIRE(pr.system.prop == tm.substitute(tm.binder_body(nnf), m));

    for (Term d : pr.system.trans) {
      std::vector<Term> cs = tm.children(d);
      for (Term p : pr.prophecies) {
        Term frame = tm.mk_eq(tm.mk_next(p), p);
        REQUIRE(std::find(cs.begin(), cs.end(), frame) != cs.end());
      }
    }
  }

  SECTION("a quantifier-free property needs no prophecies") {
    sys::ArraySystem t =
        sys::parse_system_file(tm, corpus_path("exists_token.qivc"));
    Prophecied pr = introduce_prophecies(t);
    REQUIRE(pr.prophecies.empty());
    REQUIRE(pr.system.prop == t.prop);
    REQUIRE(pr.system.vars.size() == t.vars.size());
  }

  SECTION("a non-universal property is refused") {
    sys::ArraySystem t = sys::parse_system(tm, std::string(stuck_text));
    t.prop = read_formula(t, "(exists ((i P)) (select x i))");
    REQUIRE_THROWS_WITH(introduce_prophecies(t), ContainsSubstring("universal"));
  }
}

TEST_CASE("the bakery abstraction has the advertised shape") {
  TermManager tm;
  sys::ArraySystem s = sys::parse_system_file(tm, corpus_path("bakery.qivc"));
  Prophecied pr = introduce_prophecies(guard_strengthen(s));
  AbsSystem abs = build_abstraction(pr.system, pr.prophecies);
  const check::QfSystem& qf = abs.qf;

  SECTION("substitutions, variables and disjuncts are all accounted for") {
    REQUIRE(abs.env_vars.size() == 1);
    REQUIRE(tm.name_of(abs.env_vars[0]) == "e1");
    std::vector<std::string> want = {
        "rule 1: i->p1", "rule 1: i->p2", "rule 1: i->e1",
        "rule 2: i->p1", "rule 2: i->p2", "rule 2: i->e1",
        "rule 3: i->p1", "rule 3: i->p2", "rule 3: i->e1",
        "stutter"};
    REQUIRE(abs.substitution_log == want);

    std::set<std::string> names;
    for (Term v : qf.vars) names.insert(tm.name_of(v));
    std::set<std::string> expect = {
        "state@p1",  "state@p2",  "state@e1", "ticket@p1", "ticket@p2",
        "ticket@e1", "next_ticket", "to_serve", "p1", "p2", "e1"};
    REQUIRE(names == expect);

    REQUIRE(tm.op(qf.trans) == Op::Or);
    REQUIRE(tm.children(qf.trans).size() == 10);
    for (Term f : {qf.init, qf.trans, qf.prop, qf.background}) {
      REQUIRE_FALSE(contains_quantifier(tm, f));
      REQUIRE_FALSE(contains_next(tm, f));
    }
  }

  SECTION("every disjunct freezes the prophecies; only stutter frees e1") {
    Term p1 = pr.prophecies[0], p2 = pr.prophecies[1];
    Term e1 = abs.env_vars[0];
    Term p1n = tm.mk_const("p1@n", tm.sort_of(p1));
    Term p2n = tm.mk_const("p2@n", tm.sort_of(p2));
    Term e1n = tm.mk_const("e1@n", tm.sort_of(e1));
    std::vector<Term> ds = tm.children(qf.trans);
    for (Term d : ds) {
      REQUIRE(entails(tm, qf, d, tm.mk_eq(p1n, p1)));
      REQUIRE(entails(tm, qf, d, tm.mk_eq(p2n, p2)));
    }
    // the stuttering disjunct keeps tracked cells yet may retarget e1
    Term stut = ds.back();
    Term sp1 = tm.mk_const("state@p1", qf.enum_sorts[0]);
    Term sp1n = tm.mk_const("state@p1@n", qf.enum_sorts[0]);
    REQUIRE(entails(tm, qf, stut, tm.mk_eq(sp1n, sp1)));
    REQUIRE(satisfiable(tm, qf, {stut, tm.mk_not(tm.mk_eq(e1n, e1))}));
    // a rule disjunct moves tracked state: take at p1 sets state@p1 to wait
    Term wait = tm.mk_enum(qf.enum_sorts[0], "wait");
    REQUIRE(satisfiable(tm, qf,
                        {qf.background, ds[0], tm.mk_eq(sp1n, wait),
                         tm.mk_not(tm.mk_eq(sp1, wait))}));
  }

  SECTION("the initial condition constrains prophecy cells and no others") {
    Term sp1 = tm.mk_const("state@p1", qf.enum_sorts[0]);
    Term se1 = tm.mk_const("state@e1", qf.enum_sorts[0]);
    Term idle = tm.mk_enum(qf.enum_sorts[0], "idle");
    Term crit = tm.mk_enum(qf.enum_sorts[0], "crit");
    REQUIRE_FALSE(satisfiable(tm, qf, {qf.background, qf.init,
                                       tm.mk_not(tm.mk_eq(sp1, idle))}));
    REQUIRE(satisfiable(tm, qf, {qf.background, qf.init, tm.mk_eq(se1, crit)}));
  }

  SECTION("the abstract property is the opened mutual exclusion matrix") {
    Term p1 = pr.prophecies[0], p2 = pr.prophecies[1];
    Term sp1 = tm.mk_const("state@p1", qf.enum_sorts[0]);
    Term sp2 = tm.mk_const("state@p2", qf.enum_sorts[0]);
    Term crit = tm.mk_enum(qf.enum_sorts[0], "crit");
    Term expect = tm.mk_implies(
        tm.mk_not(tm.mk_eq(p1, p2)),
        tm.mk_not(tm.mk_and(tm.mk_eq(sp1, crit), tm.mk_eq(sp2, crit))));
    smt::BundledSolver sol(tm);
    qf.declare(sol);
    sol.assert_term(tm.mk_not(tm.mk_iff(qf.prop, expect)));
    REQUIRE(sol.check_sat() == smt::Verdict::Unsat);
  }
}

TEST_CASE("concrete bakery runs are matched by abstract runs") {
  TermManager tm;
  sys::ArraySystem s = sys::parse_system_file(tm, corpus_path("bakery.qivc"));
  Prophecied pr = introduce_prophecies(guard_strengthen(s));
  AbsSystem abs = build_abstraction(pr.system, pr.prophecies);
  std::vector<Sexpr> rules = trans_sexprs(slurp(corpus_path("bakery.qivc")));
  SortId loc = abs.qf.enum_sorts[0];

  SECTION("two processes, lockstep: four concrete steps, four abstract steps") {
    std::vector<std::vector<BState>> traces = bakery_traces(2, 4, rules);
    REQUIRE(traces.size() >= 20);
    Unroller un(tm, abs, 4, 1);
    for (const std::vector<BState>& tr : traces) {
      std::vector<std::vector<std::pair<std::string, Term>>> obs;
      for (const BState& b : tr) obs.push_back(bakery_pins(tm, loc, b));
      INFO("trace of length " << tr.size() - 1);
      REQUIRE(un.covers(obs));
    }
  }

  SECTION("three processes: stuttering bridges steps of the third process") {
    std::vector<std::vector<BState>> traces = bakery_traces(3, 2, rules);
    REQUIRE(traces.size() >= 5);
    Unroller un(tm, abs, 2, 2);
    for (const std::vector<BState>& tr : traces) {
      std::vector<std::vector<std::pair<std::string, Term>>> obs;
      for (const BState& b : tr) obs.push_back(bakery_pins(tm, loc, b));
      REQUIRE(un.covers(obs));
    }
  }
}

TEST_CASE("candidate checking through the abstraction") {
  TermManager tm;

  SECTION("a stuck system proves its own initial condition") {
    sys::ArraySystem s = sys::parse_system(tm, std::string(stuck_text));
    ParamOutcome r =
        param_candidate_check(s, s.init, check::bundled_factory(tm));
    REQUIRE(r.holds);
  }

  SECTION("the relational protocol's property holds, small sizes included") {
    sys::ArraySystem s =
        sys::parse_system_file(tm, corpus_path("bool_proto.qivc"));
    ParamOutcome r =
        param_candidate_check(s, s.prop, check::bundled_factory(tm));
    INFO(r.reason);
    REQUIRE(r.holds);
    // independent re-validation on instances at and above the tracked count
    REQUIRE(ground_check(tm, s, 2).kind == check::PdrResult::Kind::Safe);
    REQUIRE(ground_check(tm, s, 3).kind == check::PdrResult::Kind::Safe);
  }

  SECTION("lock mutual exclusion is proved without auxiliary lemmas") {
    sys::ArraySystem s =
        sys::parse_system_file(tm, corpus_path("mutex_simple.qivc"));
    ParamOutcome r =
        param_candidate_check(s, s.prop, check::bundled_factory(tm));
    INFO(r.reason);
    REQUIRE(r.holds);
  }

  SECTION("a conjoined lemma candidate merges its universal prefixes") {
    sys::ArraySystem s =
        sys::parse_system_file(tm, corpus_path("mutex_simple.qivc"));
    Term lemma = read_formula(
        s, "(forall ((i P)) (=> (= (select pc i) crit) lock))");
    Term cand = tm.mk_and(s.prop, lemma);
    ParamOutcome r = param_candidate_check(s, cand, check::bundled_factory(tm));
    INFO(r.reason);
    REQUIRE(r.holds);
  }

  SECTION("a too-coarse abstraction yields a spurious counterexample, not a claim") {
    sys::ArraySystem s = sys::parse_system(tm, std::string(coarse_text));
    // the system is genuinely safe at small sizes
    REQUIRE(ground_check(tm, s, 2).kind == check::PdrResult::Kind::Safe);
    ParamOutcome r =
        param_candidate_check(s, s.prop, check::bundled_factory(tm));
    REQUIRE_FALSE(r.holds);
    REQUIRE_THAT(r.reason, ContainsSubstring("spurious"));
  }

  SECTION("an exhausted budget is reported, never guessed around") {
    sys::ArraySystem s = sys::parse_system_file(tm, corpus_path("bakery.qivc"));
    check::PdrOptions opts;
    opts.max_queries = 20;
    ParamOutcome r =
        param_candidate_check(s, s.prop, check::bundled_factory(tm), opts);
    REQUIRE_FALSE(r.holds);
    REQUIRE_THAT(r.reason, ContainsSubstring("gave up"));
  }

  SECTION("hypothesis violations surface as rejections") {
    sys::ArraySystem s =
        sys::parse_system_file(tm, corpus_path("exists_token.qivc"));
    ParamOutcome r =
        param_candidate_check(s, s.prop, check::bundled_factory(tm));
    REQUIRE_FALSE(r.holds);
    REQUIRE_THAT(r.reason, ContainsSubstring("hypotheses rejected"));
    REQUIRE_THAT(r.reason, ContainsSubstring("initial"));
  }

  SECTION("bakery mutual exclusion is proved through the abstraction") {
    sys::ArraySystem s = sys::parse_system_file(tm, corpus_path("bakery.qivc"));
    ParamOutcome r =
        param_candidate_check(s, s.prop, check::bundled_factory(tm));
    INFO(r.reason);
    REQUIRE(r.holds);
  }
}

TEST_CASE("the exported abstraction reparses to the same system") {
  TermManager tm;
  sys::ArraySystem s = sys::parse_system_file(tm, corpus_path("bakery.qivc"));
  Prophecied pr = introduce_prophecies(guard_strengthen(s));
  AbsSystem abs = build_abstraction(pr.system, pr.prophecies);

  std::string text = export_abstraction_text(abs);
  REQUIRE_THAT(text, ContainsSubstring("; prophecies: p1 p2"));
  REQUIRE_THAT(text, ContainsSubstring("; environment: e1"));
  REQUIRE_THAT(text, ContainsSubstring("; rule 3: i->e1"));

  sys::ArraySystem rp = sys::parse_system(tm, text);
  REQUIRE(rp.vars.size() == abs.qf.vars.size());
  for (size_t i = 0; i < rp.vars.size(); i++) {
    REQUIRE(rp.vars[i].sym == abs.qf.vars[i]);
    bool isp = std::find(abs.prophecies.begin(), abs.prophecies.end(),
                         rp.vars[i].sym) != abs.prophecies.end();
    REQUIRE(rp.vars[i].frozen == isp);
  }
  REQUIRE(rp.prop == abs.qf.prop);
  REQUIRE(rp.init == tm.mk_and(abs.qf.background, abs.qf.init));

  TermMap to_next;
  for (size_t i = 0; i < abs.qf.vars.size(); i++)
    to_next.emplace(abs.qf.primed[i], tm.mk_next(abs.qf.vars[i]));
  std::vector<Term> ds = tm.children(abs.qf.trans);
  REQUIRE(rp.trans.size() == ds.size());
  for (size_t k = 0; k < ds.size(); k++)
    REQUIRE(rp.trans[k] == tm.substitute(ds[k], to_next));
}
