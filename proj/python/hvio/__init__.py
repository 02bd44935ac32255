"""Python bindings for the hvio visual-inertial odometry core."""

try:
    from . import _hvio
except ImportError:  # build tree: the extension sits beside the package
    import _hvio

globals().update({k: v for k, v in vars(_hvio).items() if not k.startswith("__")})
__all__ = [k for k in vars(_hvio) if not k.startswith("_")]
