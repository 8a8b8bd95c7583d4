#ifndef MINIPBX_NOTIFY_HPP
#define MINIPBX_NOTIFY_HPP

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "minipbx/vtime.hpp"

namespace minipbx::notify {

enum class Category { AdminAlert, VoicemailNotice };

const char* category_name(Category c);

struct Notification {
    std::string to;
    std::string subject;
    std::string body;
    VTime at = 0;
    Category category = Category::AdminAlert;
};

// In-memory mail sink standing in for the SMTP/POP machinery. Infallible by
// design; tests observe it through drain() and the journal.
class Sink {
public:
    // Returns the receipt id; ids are strictly increasing from 1.
    std::uint64_t send(Notification n);

    std::vector<const Notification*> drain(std::optional<Category> category = std::nullopt,
                                           std::optional<std::string> recipient =
                                               std::nullopt) const;

    std::size_t size() const { return entries_.size(); }
    const Notification& at(std::size_t i) const { return entries_[i]; }

    // Append-only journal of RFC-822-flavored blocks.
    void write_journal(std::ostream& out) const;

private:
    std::vector<Notification> entries_;
    std::uint64_t next_receipt_ = 1;
};

}  // namespace minipbx::notify

#endif
