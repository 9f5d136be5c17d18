"""Random-walk verification of projection uniform stoquastic Hamiltonians."""

from .errors import (CalibrationError, CapacityError, ConvergenceError, InstanceParseError,
                     InvalidInstanceError, LemmaViolation, StoqwalkError)
from .instance import (Hamiltonian, LocalTerm, check_valid, gen_frustrated, gen_ghz_chain,
                       gen_hypercube, gen_leaky_chain, gen_random, load, loads, validate)
from .spectral import ground_energy, groundspace_decomposition
from .graph import cut_stats, is_bad, neighbors
from .walk import WalkParams, calibrate_T, rejection_probability, verify
from .expansion import find_good_start, find_weak_set, truncate_groundstate
from .compiler import (ReversibleCircuit, StoqVerifier, acceptance_probability, history_state,
                       kitaev_compile, ma_to_stoqma, optimal_acceptance)

__version__ = "0.1.0"
