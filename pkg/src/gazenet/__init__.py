
from .tensor import Tensor, ShapeError, no_grad, concat, stack
from .module import Module, Parameter
from .models import SpatiotemporalNetConfig, KnightPupilConfig
from .models import build_spatiotemporal_net, build_knightpupil, build_model
from .scaling import ScalingCoefficients, compound_scale
from .streaming import StreamingSession, streaming_infer, stream_gaze
