#ifndef MIGRASIM_TASK_HPP
#define MIGRASIM_TASK_HPP

#include <coroutine>
#include <exception>
#include <optional>
#include <utility>

namespace migrasim {

// Coroutine type for simulated threadlet code. A threadlet body is a
// SimTask<void>; helpers that perform machine operations and return a value
// are SimTask<T> and are awaited by their caller. Nested tasks start and
// finish inside the caller's scheduler slice (symmetric transfer); only the
// machine-op awaitables in Ctx yield back to the scheduler.

namespace detail {

struct TaskPromiseBase {
  std::coroutine_handle<> continuation = std::noop_coroutine();
  std::exception_ptr error;

  struct FinalAwaiter {
    bool await_ready() const noexcept { return false; }
    template <typename Promise>
    std::coroutine_handle<> await_suspend(std::coroutine_handle<Promise> h) noexcept {
      return h.promise().continuation;
    }
    void await_resume() const noexcept {}
  };

  std::suspend_always initial_suspend() noexcept { return {}; }
  FinalAwaiter final_suspend() noexcept { return {}; }
  void unhandled_exception() { error = std::current_exception(); }
  void rethrow_if_error() {
    if (error) std::rethrow_exception(error);
  }
};

template <typename T>
struct TaskPromise : TaskPromiseBase {
  std::optional<T> value;
  void return_value(T v) { value = std::move(v); }
  T take_result() {
    rethrow_if_error();
    return std::move(*value);
  }
};

template <>
struct TaskPromise<void> : TaskPromiseBase {
  void return_void() {}
  void take_result() { rethrow_if_error(); }
};

}  // namespace detail

template <typename T = void>
class [[nodiscard]] SimTask {
 public:
  struct promise_type : detail::TaskPromise<T> {
    SimTask get_return_object() {
      return SimTask(std::coroutine_handle<promise_type>::from_promise(*this));
    }
  };
  using handle_type = std::coroutine_handle<promise_type>;

  SimTask() = default;
  explicit SimTask(handle_type h) : handle_(h) {}
  SimTask(SimTask&& other) noexcept : handle_(std::exchange(other.handle_, nullptr)) {}
  SimTask& operator=(SimTask&& other) noexcept {
    if (this != &other) {
      if (handle_) handle_.destroy();
      handle_ = std::exchange(other.handle_, nullptr);
    }
    return *this;
  }
  SimTask(const SimTask&) = delete;
  SimTask& operator=(const SimTask&) = delete;
  ~SimTask() {
    if (handle_) handle_.destroy();
  }

  handle_type handle() const { return handle_; }
  bool done() const { return !handle_ || handle_.done(); }

  // Awaiting a sub-task transfers control into it immediately; it runs until
  // its first machine op (or completion) within the current slice.
  bool await_ready() const noexcept { return false; }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> parent) noexcept {
    handle_.promise().continuation = parent;
    return handle_;
  }
  T await_resume() { return handle_.promise().take_result(); }

 private:
  handle_type handle_;
};

}  // namespace migrasim

#endif
