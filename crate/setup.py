import shutil
import subprocess
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CargoExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CargoBuild(build_ext):
    def build_extension(self, ext):
        root = Path(__file__).resolve().parent
        subprocess.check_call(["cargo", "build", "--release", "-p", "admg-py"], cwd=root)
        built = root / "target" / "release" / "libadmg_py.so"
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(built, dest)


setup(
    name="admgpy",
    version="0.1.0",
    description="Causal modelling with acyclic directed mixed graphs",
    package_dir={"": "python"},
    packages=["admgpy"],
    ext_modules=[CargoExtension("admgpy._rustlib")],
    cmdclass={"build_ext": CargoBuild},
    zip_safe=False,
)
