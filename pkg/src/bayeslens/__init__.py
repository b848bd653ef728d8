"""Compositional Bayesian inversion over finite and Gaussian Markov kernels."""
from . import finstoch, gauss
from .base import CategoryBackend, SupportedInverse, get_backend
from .diagram import (Copy, Delete, Gen, Id, Layer, NormalForm, Par, Seq, State, Swap,
                      normalize, par, seq, typecheck)
from .errors import (BayesLensError, DegeneratePrior, DimensionMismatch, EmptySupport,
                     InvalidKernel, TypeMismatch, UnboundName, UnsupportedInverse,
                     ZeroMassObservation)
from .finstoch import FinSupport, StochasticMatrix, ZeroFillPolicy
from .gauss import AffineSupport, GaussianKernel
from .lens import (BayesianLens, DependentBayesianLens, InvertOptions, check_lens_law,
                   exact_inversion_functor, identity_lens, inversion_functor_T,
                   lens_compose, lens_tensor)
from .objects import ObjectRef
from .semantics import almost_equal, evaluate, invert_expr

__version__ = "0.1.0"
