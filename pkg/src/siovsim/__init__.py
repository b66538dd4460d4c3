"""Ethical decision engine and deterministic network simulator for
smart vehicles.

The library has three layers.  The value calculus (:mod:`.ethics`)
scores unavoidable-collision options by total utilitarian force — the
product of crash force and the ethical value of everyone exposed to it
— and picks the minimum.  The rule filter (:mod:`.rules`,
:mod:`.node`) runs each option through a prioritized, versioned law
base first, so the calculus only ever chooses among lawful (or, when
nothing is lawful, least-severely-unlawful) options.  The network
layer (:mod:`.netsim`) embeds deciding vehicles in a simulated
roadside network — broadcast flooding with suppression, report
corroboration, information-norm quarantine, platoons, emergency
signal preemption, scripted attacks — on a fully deterministic
discrete-event clock.

Every decision and every security-relevant network event lands in a
hash-chained audit log (:mod:`.audit`) that can be verified and
replayed offline.  :mod:`.scenario` reads and writes the JSON scenario
format; :mod:`.report` renders tables, diagrams, and traces; the
``siovsim`` command (:mod:`.cli`) fronts it all.
"""

from .audit import (
    GENESIS_HASH,
    AuditLog,
    AuditRecord,
    ChainVerification,
    RecordKind,
    canonical_json,
    digest,
    load_records,
    replay_decisions,
    verify_chain,
)
from .entities import (
    DEFAULT_SAFETY_RATING_BY_KIND,
    EntityKind,
    EntityState,
    NodeRole,
)
from .errors import (
    AddressingError,
    ConfigurationError,
    DomainError,
    IntegrityError,
    MembershipError,
    RoutingError,
    RuleValidationError,
    ScenarioSyntaxError,
    ScenarioValidationError,
    SiovError,
    TopologyError,
    VersionError,
)
from .ethics import (
    DEFAULT_AGE_BOUNDARIES,
    MAX_SAFETY_RATING,
    PEDESTRIAN_SAFETY_RATING,
    CandidateAction,
    LifeStageCategory,
    Occupant,
    Participant,
    crash_force,
    daly,
    life_stage_category,
    personal_ethical_value,
    select_min_tuf,
    total_ethical_value,
    total_utilitarian_force,
    utilitarian_force,
)
from .netsim import (
    Channel,
    Message,
    MessageKind,
    NetworkConfig,
    NetworkSim,
    PapaPolicy,
    PreemptionOutcome,
    Region,
    Route,
    Signal,
    papa_check,
)
from .node import (
    Command,
    CommandKind,
    Decision,
    Hierarchy,
    Percept,
    PerceptKind,
    RcsNode,
    WorldModel,
    decompose_command,
    derive_outcome_flags,
    generate_behavior,
    judge,
    normalize_sensor_events,
    update_world_model,
)
from .report import (
    DecisionReport,
    build_decision_report,
    format_decision_text,
    render_force_diagram,
    report_from_decision_record,
    trace_csv,
    uf_table_csv,
)
from .rules import (
    Law,
    OutcomeFlags,
    PredicateKind,
    RuleBase,
    RuleBaseHistory,
    SelScore,
    Verdict,
    VerdictStatus,
    admissible_actions,
    default_rulebase,
    evaluate,
    sel_compare,
    update_rulebase,
)
from .scenario import (
    Scenario,
    ScenarioCandidate,
    RunResult,
    parse_rulebase_document,
    parse_scenario,
    run_scenario,
    scenario_digest,
    serialize_scenario,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
