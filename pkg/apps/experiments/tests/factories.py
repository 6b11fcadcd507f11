import factory


class TopologyFactory(factory.DictFactory):
    kind = 'ring'
    n = 4


class DataFactory(factory.DictFactory):
    regime = 'label_skew'
    seed = 3
    n_classes = 3
    n_features = 4
    per_class = 24
    separation = 3.0
    labels_per_agent = 2


class ModelLayoutFactory(factory.DictFactory):
    hidden = factory.List([5])


class AlgorithmFactory(factory.DictFactory):
    name = 'gatta'
    eta = 0.01
    mu = 0.9


class RunFactory(factory.DictFactory):
    rounds = 3
    seed = 0
    batch_size = 8


class ExperimentConfigFactory(factory.DictFactory):
    topology = factory.SubFactory(TopologyFactory)
    data = factory.SubFactory(DataFactory)
    model = factory.SubFactory(ModelLayoutFactory)
    algorithm = factory.SubFactory(AlgorithmFactory)
    run = factory.SubFactory(RunFactory)
