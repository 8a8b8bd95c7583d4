#ifndef MINIPBX_DIALPLAN_HPP
#define MINIPBX_DIALPLAN_HPP

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "minipbx/confkit.hpp"
#include "minipbx/vtime.hpp"

namespace minipbx::dialplan {

inline constexpr int kStepBudget = 10000;
inline constexpr VTime kInterDigitTimeout = 5 * kMillisPerSecond;
inline constexpr char kReadTerminator = '#';

// --- Actions the interpreter emits, consumed by ivrvm and sipnode ---

struct Play {
    std::string file;  // symbolic prompt token, no audio exists
};
struct Hangup {};
struct Read {
    std::string into;    // register name
    std::string prompt;  // played before collecting digits
};
struct GotoTarget {
    std::optional<std::string> context;
    std::optional<std::string> exten;
    int priority = 1;
};
struct Goto {
    GotoTarget target;
};
struct Dial {
    std::string target;  // peer to ring
    VTime timeout = 20 * kMillisPerSecond;
};
struct Query {
    std::string statement;  // named query template resolved by acl
};
struct SayDigits {
    std::string digits;
};
struct VoiceMail {
    std::string box;
    std::string context;
};

using Action = std::variant<Play, Hangup, Read, Goto, Dial, Query, SayDigits, VoiceMail>;

const char* action_name(const Action& a);
std::string action_text(const Action& a);  // one-line trace form

// True for Read/Dial/Query: the caller must supply a completion before the
// next step.
bool action_awaits(const Action& a);

class CompileError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class RuntimeError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PlanLine {
    int priority;
    confkit::OperationCall op;
};

// Compiled, context-indexed executable form of extensions.conf.
class Dialplan {
public:
    // Requires a passing validation report; duplicate (context, exten,
    // priority) is a compile error.
    static Dialplan compile(const confkit::DialplanDoc& doc,
                            const confkit::ValidationReport& report);

    const std::vector<PlanLine>* lines(const std::string& context,
                                       const std::string& exten) const;
    bool has_exten(const std::string& context, const std::string& exten) const;

    std::string dump() const;  // `pbxctl plan show`

private:
    std::map<std::pair<std::string, std::string>, std::vector<PlanLine>> index_;
};

// Per-call interpreter state; pure value driven by step().
struct ExecState {
    std::string context;
    std::string exten;
    std::size_t cursor = 0;  // index into the priority-sorted line list
    std::map<std::string, std::string> regs;
    int steps = 0;
    bool done = false;
    bool budget_exhausted = false;
    std::optional<std::string> runtime_error;

    enum class Pending { None, Digits, DialResult, QueryResult };
    Pending pending = Pending::None;
    std::string pending_register;  // for Pending::Digits
};

ExecState make_state(const std::string& context, const std::string& exten);

// Completion input for a pending await.
struct StepInput {
    std::optional<std::string> digits;        // collected DTMF, '#' terminator included
    std::optional<bool> dial_answered;        // false = timeout/no answer
    std::optional<std::string> query_result;  // digit-string value
};

// Emits the action at the cursor and advances. When the previous action
// awaited, `input` resolves it first. Goto rewrites the cursor internally
// (a missing target logs into the state and yields Hangup); falling off the
// last priority or exhausting the step budget yields Hangup.
Action step(const Dialplan& plan, ExecState& state, const StepInput& input = {});

}  // namespace minipbx::dialplan

#endif
