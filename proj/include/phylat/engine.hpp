#pragma once

#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phylat/time.hpp"

namespace phylat {

class Engine;

enum class ActivityState { Runnable, WaitingOnTime, WaitingOnBuffer, WaitingOnFlag, Done };

inline const char* to_string(ActivityState s) {
  switch (s) {
    case ActivityState::Runnable: return "runnable";
    case ActivityState::WaitingOnTime: return "waiting-on-time";
    case ActivityState::WaitingOnBuffer: return "waiting-on-buffer";
    case ActivityState::WaitingOnFlag: return "waiting-on-flag";
    case ActivityState::Done: return "done";
  }
  return "?";
}

/// Raised when the event queue drains while one or more activities still wait
/// on a buffer or flag. A mis-wired flag dependency is the usual cause, so the
/// message names every blocked activity and what it awaits.
class DeadlockError : public std::runtime_error {
 public:
  explicit DeadlockError(const std::string& what) : std::runtime_error(what) {}
};

struct Activity;

/// Coroutine type for simulation processes. Activities are started by
/// Engine::spawn and advance only when the kernel resumes them.
class Process {
 public:
  struct promise_type {
    Activity* activity = nullptr;
    std::exception_ptr error;

    Process get_return_object() {
      return Process{std::coroutine_handle<promise_type>::from_promise(*this)};
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    std::suspend_always final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() { error = std::current_exception(); }
  };

  using Handle = std::coroutine_handle<promise_type>;

  explicit Process(Handle h) : handle(h) {}
  Handle handle;
};

struct Activity {
  std::string id;
  ActivityState state = ActivityState::Runnable;
  std::string waiting_on;  // buffer/flag id while parked
  Process::Handle handle;

  ~Activity() {
    if (handle) handle.destroy();
  }
};

/// Cancelable handle for a scheduled event.
class EventHandle {
 public:
  EventHandle() = default;

  /// Cancels the event if it has not fired yet; returns true when this call
  /// performed the cancellation.
  bool cancel() {
    auto rec = rec_.lock();
    if (!rec || rec->canceled || rec->fired) return false;
    rec->canceled = true;
    return true;
  }

 private:
  friend class Engine;
  struct Rec {
    std::function<void()> fn;
    bool canceled = false;
    bool fired = false;
  };
  explicit EventHandle(std::weak_ptr<Rec> rec) : rec_(std::move(rec)) {}
  std::weak_ptr<Rec> rec_;
};

/// Deterministic single-threaded discrete-event kernel. Events fire in
/// (time, insertion-seq) order, so equal-time events replay in the order they
/// were scheduled and two runs with the same inputs produce identical event
/// sequences.
class Engine {
 public:
  EventHandle schedule(SimTime delay, std::function<void()> fn) {
    auto rec = std::make_shared<EventHandle::Rec>();
    rec->fn = std::move(fn);
    queue_.push(Scheduled{now_ + delay, next_seq_++, rec});
    ++scheduled_;
    return EventHandle{rec};
  }

  SimTime now() const { return now_; }

  Activity& spawn(std::string id, Process p) {
    auto act = std::make_unique<Activity>();
    act->id = std::move(id);
    act->handle = p.handle;
    p.handle.promise().activity = act.get();
    Activity* raw = act.get();
    activities_.push_back(std::move(act));
    schedule(SimTime::ps(0), [this, raw] { resume(*raw); });
    return *raw;
  }

  void resume(Activity& a) {
    a.state = ActivityState::Runnable;
    a.waiting_on.clear();
    a.handle.resume();
    if (a.handle.done()) {
      a.state = ActivityState::Done;
      if (a.handle.promise().error) std::rethrow_exception(a.handle.promise().error);
    }
  }

  /// Drains the event queue and returns the timestamp of the last fired
  /// event (zero if nothing fired). Throws DeadlockError if the queue empties
  /// while activities are still parked on a buffer or flag.
  SimTime run_until_idle() {
    SimTime last = SimTime::ps(0);
    while (!queue_.empty()) {
      Scheduled ev = queue_.top();
      queue_.pop();
      if (ev.rec->canceled) {
        ++canceled_;
        continue;
      }
      now_ = ev.at;
      last = ev.at;
      ev.rec->fired = true;
      ++fired_;
      ev.rec->fn();
    }
    std::string blocked;
    for (const auto& a : activities_) {
      if (a->state == ActivityState::WaitingOnBuffer || a->state == ActivityState::WaitingOnFlag) {
        if (!blocked.empty()) blocked += "; ";
        blocked += "activity '" + a->id + "' " + to_string(a->state) + " '" + a->waiting_on + "'";
      }
    }
    if (!blocked.empty())
      throw DeadlockError("deadlock: event queue empty with blocked activities: " + blocked);
    return last;
  }

  /// Suspends the current activity for `d` simulated time. A zero delay still
  /// round-trips through the queue, so it fires after everything already
  /// scheduled at the current time.
  auto wait(SimTime d) {
    struct Awaiter {
      Engine& eng;
      SimTime d;
      bool await_ready() const { return false; }
      void await_suspend(Process::Handle h) {
        Activity* act = h.promise().activity;
        act->state = ActivityState::WaitingOnTime;
        eng.schedule(d, [&eng = eng, act] { eng.resume(*act); });
      }
      void await_resume() const {}
    };
    return Awaiter{*this, d};
  }

  std::uint64_t scheduled_count() const { return scheduled_; }
  std::uint64_t fired_count() const { return fired_; }
  std::uint64_t canceled_count() const { return canceled_; }
  const std::vector<std::unique_ptr<Activity>>& activities() const { return activities_; }

 private:
  struct Scheduled {
    SimTime at;
    std::uint64_t seq;
    std::shared_ptr<EventHandle::Rec> rec;
    bool operator>(const Scheduled& o) const {
      if (at != o.at) return at > o.at;
      return seq > o.seq;
    }
  };

  std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> queue_;
  std::vector<std::unique_ptr<Activity>> activities_;
  SimTime now_ = SimTime::ps(0);
  std::uint64_t next_seq_ = 0;
  std::uint64_t scheduled_ = 0;
  std::uint64_t fired_ = 0;
  std::uint64_t canceled_ = 0;
};

}  // namespace phylat
