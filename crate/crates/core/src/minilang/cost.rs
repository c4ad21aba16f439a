//! The charge table. These constants are the entire cost model; the
//! contract is their relative order (a map lookup is cheaper than a scan
//! loop), not the absolute values.

/// Charged when a statement begins executing. `while` charges this per
/// condition evaluation (including the final false one); `for` charges it
/// once at entry.
pub const STMT: u64 = 1;
/// Charged per `for` iteration (advance + bound check).
pub const LOOP_ITER: u64 = 1;
/// Charged per binary or unary arithmetic/comparison operation.
pub const BINOP: u64 = 1;
pub const LEN: u64 = 1;
pub const INDEX: u64 = 1;
pub const APPEND: u64 = 1;
pub const MAP_INSERT: u64 = 2;
pub const MAP_LOOKUP: u64 = 2;
/// Call overhead, on top of the callee body's own charges.
pub const CALL: u64 = 2;
pub const READ_INT: u64 = 1;

/// Default fuel: enough for every corpus program, small enough that an
/// accidental infinite loop returns promptly.
pub const DEFAULT_FUEL: u64 = 10_000_000;

/// Call-depth bound; unbounded recursion must surface as a runtime error
/// rather than exhaust the host stack.
pub const MAX_CALL_DEPTH: usize = 200;
