from setuptools import setup, find_packages

setup(name='heart_cohorts',
      version='0.1.0',
      description='Biventricular surface meshes to cardiac simulation bundles',
      url='',
      author='',
      author_email='',
      license='',
      packages=find_packages(exclude=['examples', 'examples.*']),
      package_data={'heart_cohorts': ['data/*.csv']},
      install_requires=open('requirements.txt').read().split(),
      entry_points={'console_scripts': ['heart-cohorts = heart_cohorts.cli:main']},
      zip_safe=False)
