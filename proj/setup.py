from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

ext = Pybind11Extension(
    "pfedpm._pfedpm",
    sources=[
        "bindings/pymodule.cpp",
        "src/tensor.cpp",
        "src/autodiff.cpp",
        "src/models.cpp",
        "src/data.cpp",
        "src/protocol.cpp",
        "src/metrics.cpp",
        "src/experiment.cpp",
    ],
    include_dirs=["include", "vendor"],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
