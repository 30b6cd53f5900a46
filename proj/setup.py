"""Builds the flab._core extension by delegating to the repo's CMake project."""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        ext_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent
        build_temp = Path(self.build_temp).resolve()
        build_temp.mkdir(parents=True, exist_ok=True)
        source_dir = Path(__file__).resolve().parent
        config = "Debug" if self.debug else "Release"
        subprocess.run(
            [
                "cmake",
                "-S", str(source_dir),
                "-B", str(build_temp),
                f"-DCMAKE_BUILD_TYPE={config}",
                f"-DPython_EXECUTABLE={sys.executable}",
                f"-DFLAB_EXT_OUTPUT_DIR={ext_dir}",
                "-DFLAB_BUILD_TESTS=OFF",
                "-DFLAB_BUILD_CLI=OFF",
                "-DFLAB_BUILD_PYTHON=ON",
            ],
            check=True,
        )
        subprocess.run(
            [
                "cmake",
                "--build", str(build_temp),
                "--target", "_core",
                "--parallel", str(os.cpu_count() or 2),
            ],
            check=True,
        )


setup(ext_modules=[CMakeExtension("flab._core")], cmdclass={"build_ext": CMakeBuild})
