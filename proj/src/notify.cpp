#include "minipbx/notify.hpp"

namespace minipbx::notify {

const char* category_name(Category c) {
    switch (c) {
        case Category::AdminAlert: return "admin-alert";
        case Category::VoicemailNotice: return "voicemail-notice";
    }
    return "?";
}

std::uint64_t Sink::send(Notification n) {
    entries_.push_back(std::move(n));
    return next_receipt_++;
}

std::vector<const Notification*> Sink::drain(std::optional<Category> category,
                                             std::optional<std::string> recipient) const {
    std::vector<const Notification*> out;
    for (const auto& n : entries_) {
        if (category && n.category != *category) continue;
        if (recipient && n.to != *recipient) continue;
        out.push_back(&n);
    }
    return out;
}

void Sink::write_journal(std::ostream& out) const {
    for (const auto& n : entries_) {
        out << "To: " << n.to << '\n'
            << "Subject: " << n.subject << '\n'
            << "Date: " << iso8601(n.at) << '\n'
            << "Category: " << category_name(n.category) << '\n'
            << '\n'
            << n.body << '\n'
            << '\n';
    }
}

}  // namespace minipbx::notify
