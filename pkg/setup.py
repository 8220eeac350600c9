from setuptools import setup

setup(
    name="BugPrio",
    version="0.1.0",
    description="Bug report priority prediction with a two-stage pre-trained transformer encoder",
    packages=["BugPrio"],
    install_requires=['numpy>=1.20'],
    extras_require={
        "test": ["pytest>=7", "scipy>=1.7", "scikit-learn>=1.0"],
    },
    entry_points={
        "console_scripts": ["bugprio=BugPrio.CLI:main"],
    },
    python_requires='>=3.8',

    classifiers=[
        "Intended Audience :: Developers",
        "Operating System :: POSIX :: Linux",
        "Programming Language :: Python :: 3.8",
    ],
)
