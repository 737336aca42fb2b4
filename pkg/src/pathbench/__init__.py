"""pathbench: a CPU path tracer with megakernel and wavefront schedulers."""

__version__ = "0.1.0"
