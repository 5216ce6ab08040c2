"""
Tests for spinfactor.services exports and compatibility aliases.
"""

import unittest


class TestServicesExports(unittest.TestCase):
    def test_exports_british_and_american_aliases(self) -> None:
        from spinfactor import services

        # British spellings
        self.assertTrue(hasattr(services, "FactorisationComposer"))
        self.assertTrue(hasattr(services, "FactorisationReport"))

        # American aliases
        self.assertTrue(hasattr(services, "FactorizationComposer"))
        self.assertTrue(hasattr(services, "FactorizationReport"))
        self.assertIs(services.FactorizationComposer, services.FactorisationComposer)
        self.assertIs(services.FactorisationReport, services.FactorizationReport)

        # __all__ includes both
        for name in ("FactorisationComposer", "FactorizationComposer",
                     "FactorisationReport", "FactorizationReport"):
            self.assertIn(name, services.__all__)

    def test_all_names_resolve(self) -> None:
        from spinfactor import services

        for name in services.__all__:
            self.assertTrue(hasattr(services, name), name)

    def test_can_instantiate_services(self) -> None:
        from spinfactor.services import FactorizationComposer, GlauberSampler
        from tests.test_config import hardcore_path

        # Instances should construct without error
        self.assertIsNotNone(FactorizationComposer())
        self.assertIsNotNone(GlauberSampler(hardcore_path(3)))


if __name__ == "__main__":
    unittest.main()
